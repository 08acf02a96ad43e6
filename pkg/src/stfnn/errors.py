"""Exception hierarchy.

Validation problems (bad shapes, bad files, bad configs) derive from
:class:`ValidationError`; numerical breakdowns from :class:`NumericalError`.
The CLI maps the two families onto distinct exit codes.
"""


class StfnnError(Exception):
    pass


class ValidationError(StfnnError, ValueError):
    pass


class ShapeError(ValidationError):
    pass


class IngestionError(ValidationError):
    pass


class NumericalError(StfnnError, ArithmeticError):
    pass


class DegenerateDataError(NumericalError):
    pass


class SingularFitError(NumericalError):
    pass


class TrainingError(NumericalError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
