"""Deterministic layered-stack simulation engine.

Subsystems: bit-layer substrate (`bitspace`), predicate algebra (`boolalg`),
self-modifying classes (`classes`), the layer-propagation machine
(`stack_engine`), hierarchical context packing (`memory_packer`), patch
decision trees (`decisions`), conditioning-class I/O (`io_system`), genetic
packing search (`training`), hormone/priority dynamics (`dynamics`), and the
run orchestration CLI (`config`, `runner`, `cli`).
"""

__version__ = "0.1.0"
