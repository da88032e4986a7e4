import hashlib

from .errors import EmptyPath


def path_fingerprint(hops) -> str:
    """Stable 16-hex-char digest of an ordered hop sequence.

    Canonical form is ``isd-as#in,out`` per hop joined by ``|``; the digest is
    the first 64 bits of its SHA-256.
    """
    if not hops:
        raise EmptyPath("cannot fingerprint an empty hop list")
    canonical = "|".join(f"{h.isd_as}#{h.ingress_if},{h.egress_if}" for h in hops)
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()[:16]
