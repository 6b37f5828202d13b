@dataclasses.dataclass
class QueryPartialSolution(pg.Object):
  attributes: dict[str, list[str]]
