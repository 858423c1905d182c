"""Exception hierarchy shared by every module."""


class PLSAError(Exception):
    """Base class for all errors raised by this package.

    ``iteration`` is filled in by the training loop when an error escapes
    one of the EM updates.
    """

    iteration = None


class ParseError(PLSAError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HeaderError(ParseError):
    pass


class NNZMismatchError(ParseError):
    pass


class IndexRangeError(ParseError):
    pass


class CountError(ParseError):
    pass


class VocabSizeError(ParseError):
    pass


class EmptyDocumentError(ParseError):
    pass


class ValidationError(PLSAError):
    """A parameter set or corpus violates its invariants."""


class ConversionError(PLSAError):
    """Formulation 1 <-> 2 conversion hit a zero marginal."""


class DegeneratePosteriorError(PLSAError):
    def __init__(self, d, w):
        self.d, self.w = int(d), int(w)
        super().__init__(
            f"degenerate posterior at (d={self.d}, w={self.w}): "
            "term has zero probability under every topic the document uses"
        )


class ZeroDensityError(PLSAError):
    def __init__(self, d, w):
        self.d, self.w = int(d), int(w)
        super().__init__(f"zero model density at (d={self.d}, w={self.w}); log-likelihood is -inf")


class DeadTopicError(PLSAError):
    def __init__(self, topic):
        self.topic = int(topic)
        super().__init__(f"topic {self.topic} received no responsibility mass (dead topic)")


class InfiniteKLError(PLSAError):
    def __init__(self, d, w):
        self.d, self.w = int(d), int(w)
        super().__init__(
            f"q puts mass outside the posterior support at (d={self.d}, w={self.w}); KL is infinite"
        )
