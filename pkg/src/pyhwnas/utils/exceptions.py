from enum import IntEnum



class ErrorCodes(IntEnum):
    SUCCESS = 0
    VALIDATION_ERROR = 1
    IO_ERROR = 2
    NUMERICAL_ERROR = 3
    
    @classmethod
    def raise_error(cls, error_code=VALIDATION_ERROR, error_msg=""):
        return cls.get_error_class(error_code)(error_msg)
    
    @classmethod
    def get_error_class(cls, error_code: int):
        match error_code:
            case cls.VALIDATION_ERROR:
                cls_error = ValidationError
            case cls.IO_ERROR:
                cls_error = HwnasIOError
            case cls.NUMERICAL_ERROR:
                cls_error = NumericalError
            case _:
                cls_error = HwnasError
        return cls_error
    
    @classmethod
    def from_exception(cls, exc: BaseException) -> "ErrorCodes":
        match exc:
            case NumericalError():
                return cls.NUMERICAL_ERROR
            case HwnasIOError() | OSError():
                return cls.IO_ERROR
            case ValidationError() | ValueError():
                return cls.VALIDATION_ERROR
            case _:
                return cls.VALIDATION_ERROR



class HwnasError(Exception):
    pass



class ValidationError(HwnasError, ValueError):
    pass



class ShapeError(ValidationError):
    pass



class AdmissibilityError(ValidationError):
    pass



class ConfigError(ValidationError):
    pass



class TableFormatError(ValidationError):
    def __init__(self, msg="", line_no=None):
        if line_no is not None:
            msg = f"line {line_no}: {msg}"
        super().__init__(msg)
        self.line_no = line_no



class HwnasIOError(HwnasError):
    pass



class NumericalError(HwnasError):
    def __init__(self, msg="", epoch=None, phase=None):
        if epoch is not None:
            msg = f"epoch {epoch} ({phase} phase): {msg}"
        super().__init__(msg)
        self.epoch = epoch
        self.phase = phase
