"""Exception hierarchy shared across the package."""


class IRTagsError(Exception):
    """Base class for every error raised by irtags."""


# tagcodes
class TagCodeError(IRTagsError):
    pass


class PayloadTooLong(TagCodeError):
    pass


class UnsupportedVersion(TagCodeError):
    pass


class FormatInfoUnreadable(TagCodeError):
    pass


class EccFailure(TagCodeError):
    pass


class IdOutOfRange(TagCodeError):
    pass


class BorderViolation(TagCodeError):
    pass


class NoMatch(TagCodeError):
    pass


# meshops
class MeshError(IRTagsError):
    pass


class MalformedStl(MeshError):
    pass


class EmptyMesh(MeshError):
    pass


class TagLargerThanFace(MeshError):
    pass


class SurfaceTooCurved(MeshError):
    pass


class PrismProtrudes(MeshError):
    pass


class NonWatertight(MeshError):
    pass


# embedder
class InvalidCombination(IRTagsError):
    pass


class ThicknessOutOfWindow(IRTagsError):
    pass


# irsim
class CameraInsideObject(IRTagsError):
    pass


class EmptyRoi(IRTagsError):
    pass


class NoBracket(IRTagsError):
    pass


# detect
class ImageSmallerThanGrid(IRTagsError):
    pass


class EvenKsize(IRTagsError):
    pass


class EvenBlockSize(IRTagsError):
    pass


class DegenerateQuad(IRTagsError):
    pass
