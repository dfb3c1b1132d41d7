MEASURE_LIST = ['Scope-v0', 'Scale-v0', 'TC-v0']

# CLI subcommand -> registered measure
COMMAND_MEASURES = {'scope': 'Scope-v0', 'scale': 'Scale-v0', 'tc': 'TC-v0'}
