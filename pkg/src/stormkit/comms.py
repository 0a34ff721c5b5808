"""Performative-based messaging, wire codec, and the central message router.

All communication passes through the router, which also provides name
registration and offline store-and-forward: envelopes sent to a known
but disconnected name queue up and flush, in order, when the name
re-registers. The wire format is a 4-byte big-endian length prefix
followed by one UTF-8 s-expression per message.
"""

from __future__ import annotations

import logging
import os
import re
import socket
import socketserver
import struct as bytestruct
import threading
from collections.abc import Callable, Iterator
from dataclasses import dataclass

from .errors import NameTaken, ParseError, ProtocolError, UnknownReceiver
from .kernel import AgentHandle, Component
from .logic import Atom, Term, make_list, parse_term, struct, write_term

log = logging.getLogger(__name__)

TERM_LANGUAGE = "logic-term"
ROUTER_ENV_VAR = "STORMKIT_ROUTER"

PERFORMATIVES = frozenset({
    "ask-one", "ask-all", "ask-if", "tell", "untell", "deny", "sorry", "reply",
    "achieve", "unachieve", "advertise", "subscribe", "register", "unregister",
    "forward", "error",
})

_TOKEN_RE = re.compile(r"[A-Za-z0-9_.+@/-]+\Z")


def _check_token(value: str, what: str) -> None:
    if not value or not _TOKEN_RE.match(value):
        raise ProtocolError(f"invalid {what}: {value!r}")


@dataclass(frozen=True)
class AclMessage:
    """One speech act between agents."""

    performative: str
    sender: str
    receiver: str
    content: Term | str
    reply_with: str | None = None
    in_reply_to: str | None = None
    language: str = TERM_LANGUAGE
    ontology: str = "stormkit"

    def __post_init__(self):
        if self.performative not in PERFORMATIVES:
            raise ProtocolError(f"unknown performative: {self.performative!r}")
        _check_token(self.sender, "sender")
        _check_token(self.receiver, "receiver")
        _check_token(self.language, "language")
        _check_token(self.ontology, "ontology")
        for token, what in ((self.reply_with, "reply-with"), (self.in_reply_to, "in-reply-to")):
            if token is not None:
                _check_token(token, what)
        if self.performative == "reply" and self.in_reply_to is None:
            raise ProtocolError("reply messages must carry in-reply-to")

    def content_term(self) -> Term:
        """The content lifted into term space (raw text becomes an atom)."""
        return self.content if not isinstance(self.content, str) else Atom(self.content)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def encode_payload(message: AclMessage) -> str:
    """Canonical s-expression rendering of a message."""
    if isinstance(message.content, str):
        if message.language == TERM_LANGUAGE:
            raise ProtocolError(f"{TERM_LANGUAGE} content must be a term")
        text = message.content
    else:
        if message.language != TERM_LANGUAGE:
            raise ProtocolError(f"term content requires language {TERM_LANGUAGE}")
        text = write_term(message.content)
    parts = [message.performative, ":sender", message.sender,
             ":receiver", message.receiver]
    if message.reply_with is not None:
        parts += [":reply-with", message.reply_with]
    if message.in_reply_to is not None:
        parts += [":in-reply-to", message.in_reply_to]
    parts += [":language", message.language, ":ontology", message.ontology,
              ":content", '"' + _escape(text) + '"']
    return "(" + " ".join(parts) + ")"


def _lex_payload(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in "()":
            tokens.append(c)
            i += 1
            continue
        if c == '"':
            i += 1
            buf = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n:
                    buf.append(text[i + 1])
                    i += 2
                    continue
                buf.append(text[i])
                i += 1
            if i >= n:
                raise ProtocolError("unterminated string in payload")
            tokens.append('"' + "".join(buf))
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in '()"':
            j += 1
        tokens.append(text[i:j])
        i = j
    return tokens


def decode_payload(text: str) -> AclMessage:
    tokens = _lex_payload(text)
    if len(tokens) < 3 or tokens[0] != "(" or tokens[-1] != ")":
        raise ProtocolError("payload is not a parenthesized message")
    body = tokens[1:-1]
    performative = body[0]
    fields: dict[str, str] = {}
    i = 1
    while i < len(body):
        key = body[i]
        if not key.startswith(":") or i + 1 >= len(body):
            raise ProtocolError(f"malformed field near {key!r}")
        fields[key[1:]] = body[i + 1]
        i += 2
    try:
        raw_content = fields.pop("content")
        sender = fields.pop("sender")
        receiver = fields.pop("receiver")
        language = fields.pop("language")
        ontology = fields.pop("ontology")
    except KeyError as missing:
        raise ProtocolError(f"missing field :{missing.args[0]}") from None
    if not raw_content.startswith('"'):
        raise ProtocolError("content must be a quoted string")
    text_content = raw_content[1:]
    content: Term | str = text_content
    if language == TERM_LANGUAGE:
        try:
            content = parse_term(text_content)
        except ParseError:
            content = text_content  # malformed term content, handlers answer sorry
    message = AclMessage(
        performative=performative,
        sender=sender,
        receiver=receiver,
        content=content,
        reply_with=fields.pop("reply-with", None),
        in_reply_to=fields.pop("in-reply-to", None),
        language=language,
        ontology=ontology,
    )
    if fields:
        raise ProtocolError(f"unexpected fields: {sorted(fields)}")
    return message


@dataclass(frozen=True)
class Envelope:
    """UTF-8 message payload as carried on the wire (without the prefix)."""

    payload: bytes

    @classmethod
    def for_message(cls, message: AclMessage) -> "Envelope":
        return cls(encode_payload(message).encode("utf-8"))

    def message(self) -> AclMessage:
        return decode_payload(self.payload.decode("utf-8"))

    def frame(self) -> bytes:
        return bytestruct.pack(">I", len(self.payload)) + self.payload


def encode(message: AclMessage) -> bytes:
    """Full wire frame: 4-byte big-endian payload length, then the payload."""
    return Envelope.for_message(message).frame()


def decode(frame: bytes) -> AclMessage:
    if len(frame) < 4:
        raise ProtocolError("frame shorter than its length prefix")
    (length,) = bytestruct.unpack(">I", frame[:4])
    if len(frame) != 4 + length:
        raise ProtocolError("frame length mismatch")
    return Envelope(frame[4:]).message()


def read_frame(reader) -> Envelope | None:
    """Read one length-prefixed envelope from a file-like byte stream."""
    prefix = reader.read(4)
    if not prefix:
        return None
    if len(prefix) < 4:
        raise ProtocolError("truncated length prefix")
    (length,) = bytestruct.unpack(">I", prefix)
    payload = b""
    while len(payload) < length:
        chunk = reader.read(length - len(payload))
        if not chunk:
            raise ProtocolError("truncated payload")
        payload += chunk
    return Envelope(payload)


# --- the router ---

ROUTER_NAME = "router"


class Router:
    """Name services, routing, and offline store-and-forward.

    Per (sender, receiver) pair, delivery order equals send order: the
    registry lock serializes routing, and mailbox flush happens before
    the name is marked live again.
    """

    def __init__(self, name: str = ROUTER_NAME):
        self.name = name
        self._lock = threading.RLock()
        self._registry: dict[str, object | None] = {}
        self._mailbox: dict[str, list[Envelope]] = {}
        self.routed_count = 0
        self.observer: Callable[[AclMessage], None] | None = None

    def register(self, name: str, connection) -> None:
        """Bind name to a connection, flushing any queued envelopes in order."""
        _check_token(name, "agent name")
        with self._lock:
            if name == self.name:
                raise NameTaken(name)
            if self._registry.get(name) is not None:
                raise NameTaken(name)
            queued = self._mailbox.pop(name, [])
            self._registry[name] = connection
        for envelope in queued:
            connection.deliver(envelope)

    def unregister(self, name: str) -> None:
        """Take a name offline; later messages queue for re-registration."""
        with self._lock:
            if name in self._registry:
                self._registry[name] = None

    def lookup(self, name: str) -> bool:
        """True when the name is currently connected."""
        with self._lock:
            return self._registry.get(name) is not None

    def known(self, name: str) -> bool:
        with self._lock:
            return name in self._registry

    def route(self, envelope: Envelope) -> None:
        """Deliver to the receiver, queue if offline, or sorry the sender."""
        message = envelope.message()
        with self._lock:
            self.routed_count += 1
            if self.observer is not None:
                self.observer(message)
            receiver = message.receiver
            if receiver not in self._registry:
                self._sorry(message)
                return
            connection = self._registry[receiver]
            if connection is None:
                self._mailbox.setdefault(receiver, []).append(envelope)
                return
        try:
            connection.deliver(envelope)
        except Exception as err:  # a dead connection means the receiver went offline
            log.info("delivery to %s failed (%s); queueing", receiver, err)
            with self._lock:
                if self._registry.get(receiver) is connection:
                    self._registry[receiver] = None
                self._mailbox.setdefault(receiver, []).append(envelope)

    def route_message(self, message: AclMessage) -> None:
        self.route(Envelope.for_message(message))

    def _sorry(self, message: AclMessage) -> None:
        """UnknownReceiver surfaces as a sorry back to the sender."""
        if message.sender == self.name:
            return
        sorry = AclMessage(
            performative="sorry",
            sender=self.name,
            receiver=message.sender,
            content=struct("error", Atom("unknown-receiver"), Atom(message.receiver)),
            in_reply_to=message.reply_with,
        )
        if message.sender not in self._registry:
            raise UnknownReceiver(message.receiver)
        envelope = Envelope.for_message(sorry)
        connection = self._registry[message.sender]
        if connection is None:
            self._mailbox.setdefault(message.sender, []).append(envelope)
        else:
            connection.deliver(envelope)


class CallbackConnection:
    """In-process connection delivering straight into a callable."""

    def __init__(self, fn: Callable[[Envelope], None]):
        self.fn = fn

    def deliver(self, envelope: Envelope) -> None:
        self.fn(envelope)


# --- per-agent communicator ---

PerformativeHandler = Callable[[AclMessage, AgentHandle], AclMessage | None]


class Communicator(Component):
    """One component task per agent: sends, receives, runs default handlers.

    Each inbound message is published as MessageReceived on the internal
    bus, forwarded to the situation manager as a trigger, offered to the
    conversation engine, and finally answered by a registered
    performative handler if one exists.
    """

    def __init__(self, handle: AgentHandle, router: Router):
        super().__init__(f"communicator:{handle.name}", owner=handle.name)
        self.agent = handle
        self.router = router
        self.handlers: dict[str, PerformativeHandler] = {}
        self.log: list[AclMessage] = []
        router.register(handle.name, CallbackConnection(self.enqueue))
        self.register_handler("ask-one", AskOneHandler())
        self.register_handler("ask-all", AskAllHandler())

    def register_handler(self, performative: str, handler: PerformativeHandler) -> None:
        self.handlers[performative] = handler

    def send(self, message: AclMessage) -> None:
        from .deliberate import InternalEvent
        self.agent.bus.publish(InternalEvent("MessageSent", _message_term(message)))
        self.router.route(Envelope.for_message(message))

    def handle(self, envelope: Envelope) -> None:
        message = envelope.message()
        self.log.append(message)
        # message reception is itself observable: perceptors watching this
        # agent see a receiveMessage invocation pair
        from .kernel import MessageIntercept
        kernel = self.agent.kernel
        args = (_message_term(message),)
        kernel._emit(MessageIntercept(self.agent.name, "receiveMessage", args, "before"))
        kernel._emit(MessageIntercept(self.agent.name, "receiveMessage", args, "after",
                                      Atom("void")))
        from .deliberate import InternalEvent
        self.agent.bus.publish(InternalEvent("MessageReceived", _message_term(message),
                                             data=message))
        manager = self.agent.components.get("situation_manager")
        if manager is not None:
            manager.enqueue(message)
        # handlers run before conversation dispatch so that belief updates
        # they make are visible to conversation guards for this message
        handler = self.handlers.get(message.performative)
        reply = handler(message, self.agent) if handler is not None else None
        conversations = self.agent.components.get("conversations")
        if conversations is not None:
            conversations.dispatch_message(message)
        if reply is not None:
            self.send(reply)

    def receive(self) -> Iterator[AclMessage]:
        """Lazy stream over messages as the communicator processes them."""
        index = 0
        while True:
            if index < len(self.log):
                yield self.log[index]
                index += 1
            else:
                return


def _message_term(message: AclMessage) -> Term:
    return struct("msg", Atom(message.performative), Atom(message.sender),
                  Atom(message.receiver), message.content_term())


class AskOneHandler:
    """Answers ask-one by deduction over the agent's mental state."""

    def __init__(self, module_order: tuple[str, ...] | None = None):
        self.module_order = module_order

    def _reply_base(self, message: AclMessage, agent: AgentHandle) -> dict:
        return {
            "sender": agent.name,
            "receiver": message.sender,
            "in_reply_to": message.reply_with,
            "ontology": message.ontology,
        }

    def query_term(self, message: AclMessage) -> Term | None:
        if message.language != TERM_LANGUAGE or isinstance(message.content, str):
            return None
        return message.content

    def __call__(self, message: AclMessage, agent: AgentHandle) -> AclMessage:
        base = self._reply_base(message, agent)
        goal = self.query_term(message)
        if goal is None:
            return AclMessage(performative="sorry",
                              content=struct("error", Atom("malformed-content")), **base)
        solution = agent.engine.ask(goal, agent.mental_state, self.module_order)
        if solution is None:
            return AclMessage(performative="sorry", content=goal, **base)
        return AclMessage(performative="tell", content=solution.resolve(goal), **base)


class AskAllHandler(AskOneHandler):
    """Natural extension: tell with the full solution list."""

    def __call__(self, message: AclMessage, agent: AgentHandle) -> AclMessage:
        base = self._reply_base(message, agent)
        goal = self.query_term(message)
        if goal is None:
            return AclMessage(performative="sorry",
                              content=struct("error", Atom("malformed-content")), **base)
        answers = [solution.resolve(goal)
                   for solution in agent.engine.solve(goal, agent.mental_state,
                                                      self.module_order)]
        return AclMessage(performative="tell", content=make_list(answers), **base)


# --- framed stream transport ---

def router_address(default: str = "127.0.0.1:7407") -> tuple[str, int]:
    """Resolve the router endpoint from STORMKIT_ROUTER or the default."""
    raw = os.environ.get(ROUTER_ENV_VAR, default)
    host, _, port = raw.rpartition(":")
    if not host:
        raise ProtocolError(f"bad router address {raw!r}; expected host:port")
    return host, int(port)


class _SocketConnection:
    def __init__(self, wfile, lock: threading.Lock):
        self.wfile = wfile
        self.lock = lock

    def deliver(self, envelope: Envelope) -> None:
        with self.lock:
            self.wfile.write(envelope.frame())
            self.wfile.flush()


class _RouterRequestHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        router: Router = self.server.router  # type: ignore[attr-defined]
        name: str | None = None
        write_lock = threading.Lock()

        def ack(receiver: str, token: str, content: Term) -> None:
            reply = AclMessage(performative="reply", sender=router.name,
                               receiver=receiver, in_reply_to=token, content=content)
            _SocketConnection(self.wfile, write_lock).deliver(Envelope.for_message(reply))

        try:
            while True:
                envelope = read_frame(self.rfile)
                if envelope is None:
                    break
                message = envelope.message()
                if message.performative == "register" and message.receiver == router.name:
                    try:
                        router.register(message.sender,
                                        _SocketConnection(self.wfile, write_lock))
                    except NameTaken:
                        ack(message.sender, "register", struct("error", Atom("name-taken")))
                        continue
                    name = message.sender
                    ack(name, "register", Atom("ok"))
                    continue
                if message.performative == "unregister" and message.receiver == router.name:
                    if name is not None:
                        router.unregister(name)
                        ack(name, "unregister", Atom("ok"))
                        name = None
                    continue
                try:
                    router.route(envelope)
                except UnknownReceiver:
                    pass  # the sorry already went back on this connection
        except (ProtocolError, NameTaken, OSError, ValueError) as err:
            log.info("router connection %s closed: %s", name or "<unregistered>", err)
        finally:
            if name is not None:
                router.unregister(name)


class RouterService:
    """The router exposed on a framed TCP stream endpoint."""

    def __init__(self, host: str = "127.0.0.1", port: int = 7407,
                 router: Router | None = None):
        self.router = router or Router()

        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self.server = _Server((host, port), _RouterRequestHandler)
        self.server.router = self.router  # type: ignore[attr-defined]
        self.address = self.server.server_address
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.server.serve_forever()

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()


class RouterClient:
    """Framed-stream client for talking to a RouterService."""

    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port))
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")
        self.name: str | None = None
        self._pending: list[AclMessage] = []

    def register(self, name: str) -> None:
        """Register and wait for the router's acknowledgement.

        Messages flushed from the offline mailbox arrive before the ack
        and are buffered for recv().
        """
        self.send(AclMessage(performative="register", sender=name,
                             receiver=ROUTER_NAME, content=Atom(name)))
        ack = self._wait_ack("register")
        if ack.content != Atom("ok"):
            raise NameTaken(name)
        self.name = name

    def unregister(self) -> None:
        if self.name is None:
            return
        self.send(AclMessage(performative="unregister", sender=self.name,
                             receiver=ROUTER_NAME, content=Atom(self.name)))
        self._wait_ack("unregister")
        self.name = None

    def _wait_ack(self, token: str) -> AclMessage:
        while True:
            message = self._read()
            if message is None:
                raise ProtocolError("connection closed while waiting for ack")
            if (message.performative == "reply" and message.sender == ROUTER_NAME
                    and message.in_reply_to == token):
                return message
            self._pending.append(message)

    def send(self, message: AclMessage) -> None:
        self.wfile.write(encode(message))
        self.wfile.flush()

    def _read(self) -> AclMessage | None:
        envelope = read_frame(self.rfile)
        return envelope.message() if envelope is not None else None

    def recv(self) -> AclMessage | None:
        if self._pending:
            return self._pending.pop(0)
        return self._read()

    def close(self) -> None:
        self.sock.close()
