"""Wire protocol v1: JSON text frames with a versioned envelope.

The machine-readable schema (v1.schema.json, shipped next to this module)
is the single source of truth; encode and decode both validate against it,
so a frame that round-trips here is by construction schema-conformant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from jsonschema import Draft202012Validator

PROTOCOL_VERSION = 1
SUPPORTED_VERSIONS = [1]

CLIENT_HELLO = "ClientHello"
SERVER_WELCOME = "ServerWelcome"
SNAPSHOT = "Snapshot"
HUMAN_COMMAND = "HumanCommand"
CONTROL = "Control"
EVENT = "Event"
ERROR = "Error"

MESSAGE_TYPES = (CLIENT_HELLO, SERVER_WELCOME, SNAPSHOT, HUMAN_COMMAND,
                 CONTROL, EVENT, ERROR)

ROLE_CONTROLLER = "human_controller"
ROLE_OBSERVER = "observer"


class MalformedFrame(ValueError):
    """Frame is not valid JSON or violates the message schema."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class VersionMismatch(ValueError):
    """Frame speaks a protocol version this side does not."""

    def __init__(self, got, supported=None):
        self.got = got
        self.supported = supported or list(SUPPORTED_VERSIONS)
        super().__init__(f"protocol version {got!r} unsupported; supported: {self.supported}")


@dataclass(frozen=True)
class WireMessage:
    type: str
    seq: int
    time: float
    payload: dict
    v: int = PROTOCOL_VERSION


_schema = json.loads(
    resources.files("holosim.protocol").joinpath("v1.schema.json").read_text())
_envelope_validator = Draft202012Validator(
    {k: v for k, v in _schema.items() if k not in ("allOf",)})
_payload_validators = {
    name: Draft202012Validator({**_schema["$defs"][name], "$defs": _schema["$defs"]})
    for name in MESSAGE_TYPES
}


def schema() -> dict:
    return _schema


def validate_payload(msg_type: str, payload: dict) -> None:
    if msg_type not in _payload_validators:
        raise MalformedFrame("unknown_type", f"unknown message type {msg_type!r}")
    errors = sorted(_payload_validators[msg_type].iter_errors(payload), key=str)
    if errors:
        raise MalformedFrame("bad_payload", f"{msg_type} payload invalid: {errors[0].message}")


def encode(msg: WireMessage) -> bytes:
    """Serialize to a UTF-8 JSON text frame; refuses schema-invalid messages."""
    if msg.v != PROTOCOL_VERSION:
        raise VersionMismatch(msg.v)
    validate_payload(msg.type, msg.payload)
    doc = {"v": msg.v, "type": msg.type, "seq": msg.seq, "time": msg.time,
           "payload": msg.payload}
    errors = sorted(_envelope_validator.iter_errors(doc), key=str)
    if errors:
        raise MalformedFrame("bad_envelope", errors[0].message)
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def decode(data: bytes | str) -> WireMessage:
    """Parse and validate one frame.

    Raises VersionMismatch for the wrong protocol version (checked first so
    the reply can advertise supported versions) and MalformedFrame for
    anything else.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode()
        except UnicodeDecodeError as e:
            raise MalformedFrame("bad_encoding", str(e)) from e
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedFrame("bad_json", str(e)) from e
    if not isinstance(doc, dict):
        raise MalformedFrame("bad_envelope", "frame must be a JSON object")
    if doc.get("v") != PROTOCOL_VERSION:
        raise VersionMismatch(doc.get("v"))
    if doc.get("type") not in MESSAGE_TYPES:
        raise MalformedFrame("unknown_type", f"unknown message type {doc.get('type')!r}")
    errors = sorted(_envelope_validator.iter_errors(doc), key=str)
    if errors:
        raise MalformedFrame("bad_envelope", errors[0].message)
    validate_payload(doc["type"], doc["payload"])
    return WireMessage(type=doc["type"], seq=doc["seq"], time=doc["time"],
                       payload=doc["payload"], v=doc["v"])
