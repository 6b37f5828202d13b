@dataclasses.dataclass
class NarrativeSummary:
  @dataclasses.dataclass
  class SummaryEvent:
    events: str
    characters: str
    places: str
    elements: str
  summary_events: dict[str, SummaryEvent]
