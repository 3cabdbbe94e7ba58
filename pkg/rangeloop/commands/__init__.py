from . import (
    equicheck_command, eval_command, index_command, label_command, project_command, query_command,
    synth_command, train_command,
)

COMMAND_MODULES = (
    synth_command, project_command, label_command, train_command,
    index_command, query_command, eval_command, equicheck_command,
)
