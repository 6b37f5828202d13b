@dataclasses.dataclass
class BookSummary:
    """Keys may be whatever you want them to be. Values should summarize in sentences only the most important attributes of the book which should include absolutely essential details such as the main characters and their motivations, the main plot, the main events, background information, and the main theme."""
    attributes: dict[str, list[str]]
