"""Exception types shared across the package."""


class CapacityError(ValueError):
    """An exact-enumeration path would exceed its configured size cap."""


class SpecError(ValueError):
    """A spec/config file failed validation; carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.reason = message
