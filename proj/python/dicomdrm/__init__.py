"""DICOM multimedia annotations and partial encryption with XML licenses.

Files are passed around as ``bytes``; tags are ``"GGGG,EEEE"`` strings and
keys are PEM text.
"""

from ._dicomdrm import (
    Error,
    PolicyError,
    add_annotation,
    classify,
    decode_annotation,
    default_policy,
    encode_annotation,
    generate_rsa_key,
    inspect,
    license_info,
    list_annotations,
    protect,
    unprotect,
    validate,
)

__all__ = [
    "Error",
    "PolicyError",
    "add_annotation",
    "classify",
    "decode_annotation",
    "default_policy",
    "encode_annotation",
    "generate_rsa_key",
    "inspect",
    "license_info",
    "list_annotations",
    "protect",
    "unprotect",
    "validate",
]
