@dataclasses.dataclass
class FunctionNaturalDescriptor:
    """candidate_functions is keyed by the exact name of the function and stores FunctionDescription objects. Each entry should represent a unique function, class method, property, getter, or setter (or anything defined with a def keyword) present in [TEXT] that potentially matches the description given in [QUESTION]. Never add the same function more than once and only add functions that appear similar to the description given in [QUESTION]. If two functions are very similar to each other, you should make sure to distinguish them in their FunctionDescription objects."""
  @dataclasses.dataclass
  class FunctionDescription:
    """purpose describes the purpose of the function i.e. what it does. input describes what the parameters of the function are. output describes what the function returns. procedure describes how the function is implemented (i.e. how it does what it does). Do not repeat the description given in [QUESTION]. You must describe the function based on what you see in [TEXT]."""
    purpose: str
    input: str
    output: str
    procedure: str
  candidate_functions: dict[str, FunctionDescription]
