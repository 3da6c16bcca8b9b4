"""hodge-deform: деформации структуры Ходжа на инвариантных моделях."""
