"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`SafsError`
so the CLI can map it to a pipeline failure exit code.
"""


class SafsError(Exception):
    pass
