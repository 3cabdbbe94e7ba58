import enum

from pydantic import BaseModel, ConfigDict

from .model_schema import CcmConfig, HeadConfig, ModelConfig, RtmConfig
from .projection_schema import ProjectionParams
from .retrieval_schema import EvalProtocol, PositiveRule
from .train_schema import TrainConfig
from .world_schema import WorldSpec


class ProfileName(str, enum.Enum):
    """Größenprofile: tiny (Tests), desk (Training auf einem Kern), full (Sensorgröße 64×900)"""
    TINY = "tiny"
    DESK = "desk"
    FULL = "full"


class Profile(BaseModel):
    """Bündelt alle Größen-Hyperparameter eines Laufs"""
    model_config = ConfigDict(frozen=True)

    name: ProfileName
    projection: ProjectionParams
    network: ModelConfig
    world: WorldSpec
    train: TrainConfig
    protocol: EvalProtocol

    def with_seed(self, seed: int) -> "Profile":
        return self.model_copy(update={
            "network": self.network.model_copy(update={"seed": seed}),
            "world": self.world.model_copy(update={"seed": seed}),
            "train": self.train.model_copy(update={"seed": seed}),
        })


def _tiny() -> Profile:
    return Profile(
        name=ProfileName.TINY,
        projection=ProjectionParams.from_degrees(90, 16, 5.0, 15.0),
        network=ModelConfig(
            ccm=CcmConfig.for_height(16, [4, 4, 8, 8], [16, 16, 16]),
            rtm=RtmConfig(k_c=3, k_s=7),
            head=HeadConfig(clusters=8, descriptor_dim=256),
        ),
        world=WorldSpec(static_count=6, movable_count=2, poses_per_loop=24),
        train=TrainConfig(epochs=5, checkpoint_interval=5),
        protocol=EvalProtocol(rule=PositiveRule.DISTANCE, exclusion_window=0),
    )


def _desk() -> Profile:
    return Profile(
        name=ProfileName.DESK,
        projection=ProjectionParams.from_degrees(90, 16, 5.0, 15.0),
        network=ModelConfig(
            ccm=CcmConfig.for_height(16, [8, 8, 16, 16], [32, 32, 32]),
            rtm=RtmConfig(k_c=3, k_s=7),
            head=HeadConfig(clusters=16, descriptor_dim=256),
        ),
        world=WorldSpec(static_count=12, movable_count=4, poses_per_loop=60, revisit_passes=1),
        train=TrainConfig(epochs=40, checkpoint_interval=10),
        protocol=EvalProtocol(rule=PositiveRule.DISTANCE, radius=4.0, exclusion_window=0),
    )


def _full() -> Profile:
    return Profile(
        name=ProfileName.FULL,
        projection=ProjectionParams.from_degrees(900, 64, 25.0, 3.0),
        network=ModelConfig(
            ccm=CcmConfig.for_height(64, [16, 16, 32, 32, 64, 64], [128, 128, 128]),
            rtm=RtmConfig(k_c=3, k_s=7),
            head=HeadConfig(clusters=64, descriptor_dim=256),
        ),
        world=WorldSpec(),
        train=TrainConfig(),
        protocol=EvalProtocol(),
    )


_BUILDERS = {ProfileName.TINY: _tiny, ProfileName.DESK: _desk, ProfileName.FULL: _full}


def get_profile(name) -> Profile:
    """
    Raises:
        ValueError: Unbekannter Profilname
    """
    try:
        key = ProfileName(name)
    except ValueError:
        raise ValueError(f"unknown profile '{name}', expected one of {[p.value for p in ProfileName]}")
    return _BUILDERS[key]()
