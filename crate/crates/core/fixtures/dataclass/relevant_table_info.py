@dataclasses.dataclass
class RelevantTableInfo(pg.Object):
  """table_descriptions is a list of TableDescription objects. One for each table."""

  @dataclasses.dataclass
  class TableDescription(pg.Object):
    """Each element in columns_observed should provide the precise name and data type of a column in the table. In relevant_statistics you should calculate and provide statistics relevant to answering the query. relationships should provide the names of other tables that are related to this table and relevant to answering the query."""
    table_name: str
    table_description: str
    columns_observed: list[str]
    relevant_statistics: list[str]
    relationships: list[str]

  table_descriptions: list[TableDescription]
