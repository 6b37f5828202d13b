@dataclasses.dataclass
class FunctionMatch:
  matches: dict[str, float]
