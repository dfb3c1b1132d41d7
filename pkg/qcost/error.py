'''
Exceptions raised by qcost. The CLI maps every subclass of `Error` to a
nonzero exit code and a one-line reason.
'''


class Error(Exception):
    '''Base class for qcost errors.'''
    reason = 'error'


class ConfigError(Error):
    reason = 'config-error'


class UsageError(ConfigError):
    reason = 'usage-error'


class SchemaError(Error):
    reason = 'schema-error'


class ArtifactError(Error):
    reason = 'artifact-error'


class ValidationError(Error):
    reason = 'validation-error'

    def __init__(self, message, ids=None):
        super().__init__(message)
        self.ids = list(ids) if ids is not None else []


class DuplicateObservationError(ValidationError):
    reason = 'duplicate-observation'


class EstimationError(Error):
    reason = 'estimation-error'


class CollinearityError(EstimationError):
    reason = 'collinearity'

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            'inner least-squares system is rank deficient; collinear '
            'columns: {}'.format(', '.join(self.columns)))


class ConvergenceError(EstimationError):
    reason = 'non-convergence'

    def __init__(self, message, best_x=None, objective=None, grad_norm=None):
        super().__init__(message)
        self.best_x = best_x
        self.objective = objective
        self.grad_norm = grad_norm


class AdmissibilityError(Error):
    reason = 'no-admissible-counterfactual'


class BootstrapError(Error):
    reason = 'bootstrap-failure'


class DgpError(Error):
    reason = 'dgp-error'


class UnregisteredMeasure(Error):
    reason = 'unregistered-measure'


# Exit code 2 in the CLI; everything else maps to 1.
USAGE_ERRORS = (ConfigError, SchemaError, ArtifactError, ValidationError)
