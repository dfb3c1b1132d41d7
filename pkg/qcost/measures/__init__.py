from qcost.measures.registry import make, register, registry, spec

# Scope Measures
register(id='Scope-v0',
    entry_point='qcost.measures.scope:SubadditivityMeasure'
)

# Scale Measures
register(id='Scale-v0',
    entry_point='qcost.measures.scale:ReturnsToScaleMeasure'
)

# Technical Change Measures
register(id='TC-v0',
    entry_point='qcost.measures.tech_change:TechChangeMeasure'
)
