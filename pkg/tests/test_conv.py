import pytest

from stormkit.comms import AclMessage, Router
from stormkit.conv import (
    ConvEvent, ConvRule, ConversationClass, MessageTemplate, Transition,
    advance, check, register_conversation_class, spawn_conversation,
)
from stormkit.kernel import Kernel
from stormkit.logic import Atom, parse_term

from helpers import make_agent


def ping_pong_class():
    return ConversationClass(
        name="ping-pong",
        states=frozenset({"Idle", "Waiting", "Done"}),
        initial="Idle",
        finals=frozenset({"Done"}),
        rules=(
            ConvRule("kick", "Idle", "Waiting",
                     such_that=lambda inst, ev: ev.kind == "signal"
                     and ev.payload == Atom("start"),
                     send_message=MessageTemplate("tell", "peers", "ping")),
            ConvRule("finish", "Waiting", "Done",
                     such_that=lambda inst, ev: ev.kind == "message"
                     and ev.message.content == Atom("pong")),
        ),
    )


def fixture(conv_class=None):
    conv_class = conv_class or ping_pong_class()
    register_conversation_class(conv_class)
    kernel = Kernel(router=Router())
    agent, _ = make_agent(kernel, name="talker", communication=True,
                          conversation_classes=(conv_class.name,))
    peer, _ = make_agent(kernel, name="peer", communication=True)
    return kernel, agent, peer


def test_guard_false_no_transition():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    result = advance(instance, ConvEvent.signal(Atom("nope")))
    assert result is None
    assert instance.current == "Idle"
    assert instance.history == []


def test_true_guard_sends_message_and_advances():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    transition = advance(instance, ConvEvent.signal(Atom("start")))
    assert transition == Transition("kick", "Idle", "Waiting", Atom("start"))
    assert instance.current == "Waiting"
    kernel.scheduler.run_until_idle()
    assert [m.content for m in peer.components["communicator"].log] == [Atom("ping")]


def test_event_with_no_matching_rule_is_ignored_and_logged():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    advance(instance, ConvEvent.signal(Atom("start")))
    history_before = list(instance.history)
    result = advance(instance, ConvEvent.signal(Atom("unrelated")))
    assert result is None
    assert instance.history == history_before
    assert instance.ignored[-1] == Atom("unrelated")


def test_final_state_ignores_all_events():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    advance(instance, ConvEvent.signal(Atom("start")))
    pong = AclMessage(performative="tell", sender="peer", receiver="talker",
                      content=Atom("pong"))
    advance(instance, ConvEvent.for_message(pong))
    assert instance.done
    result = advance(instance, ConvEvent.for_message(pong))
    assert result is None
    assert instance.current == "Done"
    assert len(instance.history) == 2


def test_check_requires_matching_from_state():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    finish = instance.conv_class.rules[1]
    pong = AclMessage(performative="tell", sender="peer", receiver="talker",
                      content=Atom("pong"))
    assert check(finish, instance, ConvEvent.for_message(pong)) is None


def test_hook_fault_rolls_back_transition():
    def bad_hook(inst, ev, bindings):
        raise RuntimeError("hook exploded")

    conv_class = ConversationClass(
        name="faulty",
        states=frozenset({"A", "B"}),
        initial="A", finals=frozenset(),
        rules=(ConvRule("r", "A", "B", such_that=lambda i, e: True,
                        do_before=bad_hook),),
    )
    kernel, agent, peer = fixture(conv_class)
    engine = agent.components["conversations"]
    instance = engine.spawn("faulty", ["peer"], start=False)
    result = advance(instance, ConvEvent.signal(Atom("go")))
    assert result is None
    assert instance.current == "A"
    assert instance.history == []


def test_do_before_and_do_after_run_in_order():
    calls = []
    conv_class = ConversationClass(
        name="ordered",
        states=frozenset({"A", "B"}),
        initial="A", finals=frozenset(),
        rules=(ConvRule(
            "r", "A", "B",
            such_that=lambda i, e: True,
            do_before=lambda i, e, b: calls.append("before"),
            send_message=lambda i, e, b: calls.append("message") or None,
            do_after=lambda i, e, b: calls.append("after")),),
    )
    kernel, agent, peer = fixture(conv_class)
    instance = agent.components["conversations"].spawn("ordered", ["peer"], start=False)
    advance(instance, ConvEvent.signal(Atom("go")))
    assert calls == ["before", "message", "after"]
    assert instance.current == "B"


def test_first_match_wins_single_transition_per_event():
    fired = []
    conv_class = ConversationClass(
        name="race",
        states=frozenset({"A", "B", "C"}),
        initial="A", finals=frozenset(),
        rules=(
            ConvRule("one", "A", "B", such_that=lambda i, e: True,
                     do_after=lambda i, e, b: fired.append("one")),
            ConvRule("two", "A", "C", such_that=lambda i, e: True,
                     do_after=lambda i, e, b: fired.append("two")),
        ),
    )
    kernel, agent, peer = fixture(conv_class)
    instance = agent.components["conversations"].spawn("race", ["peer"], start=False)
    advance(instance, ConvEvent.signal(Atom("go")))
    assert fired == ["one"]
    assert instance.current == "B"


def test_replay_reproduces_current_state():
    kernel, agent, peer = fixture()
    engine = agent.components["conversations"]
    instance = engine.spawn("ping-pong", ["peer"], start=False)
    advance(instance, ConvEvent.signal(Atom("start")))
    pong = AclMessage(performative="tell", sender="peer", receiver="talker",
                      content=Atom("pong"))
    advance(instance, ConvEvent.for_message(pong))
    assert instance.replay() == instance.current == "Done"


def test_logic_guard_with_event_facts():
    conv_class = ConversationClass(
        name="guarded",
        states=frozenset({"A", "B"}),
        initial="A", finals=frozenset(),
        rules=(ConvRule("r", "A", "B",
                        such_that="msg(tell, Peer, offer(N)), N > 5",
                        send_message=MessageTemplate("tell", "sender", "accept(N)")),),
    )
    kernel, agent, peer = fixture(conv_class)
    instance = agent.components["conversations"].spawn("guarded", ["peer"], start=False)
    low = AclMessage(performative="tell", sender="peer", receiver="talker",
                     content=parse_term("offer(3)"))
    assert advance(instance, ConvEvent.for_message(low)) is None
    high = AclMessage(performative="tell", sender="peer", receiver="talker",
                      content=parse_term("offer(9)"))
    transition = advance(instance, ConvEvent.for_message(high))
    assert transition is not None
    kernel.scheduler.run_until_idle()
    assert peer.components["communicator"].log[-1].content == parse_term("accept(9)")


def test_inbound_messages_become_instance_events():
    kernel, agent, peer = fixture()
    instance = spawn_conversation(agent, "ping-pong", ["peer"], start=True)
    kernel.scheduler.run_until_idle()  # processes the start signal, sends ping
    assert instance.current == "Waiting"
    peer.components["communicator"].send(AclMessage(
        performative="tell", sender="peer", receiver="talker", content=Atom("pong")))
    kernel.scheduler.run_until_idle()
    assert instance.current == "Done"
    assert instance.replay() == "Done"


def test_multiple_instances_with_private_queues():
    kernel, agent, peer = fixture()
    other, _ = make_agent(kernel, name="other", communication=True)
    engine = agent.components["conversations"]
    inst1 = engine.spawn("ping-pong", ["peer"], start=False)
    inst2 = engine.spawn("ping-pong", ["other"], start=False)
    inst1.queue.append(ConvEvent.signal(Atom("start")))
    kernel.scheduler.run_until_idle()
    assert inst1.current == "Waiting"
    assert inst2.current == "Idle"


def test_class_validation():
    with pytest.raises(ValueError):
        ConversationClass(name="bad", states=frozenset({"A"}), initial="Z",
                          finals=frozenset(), rules=())
    with pytest.raises(ValueError):
        ConversationClass(
            name="bad2", states=frozenset({"A"}), initial="A", finals=frozenset(),
            rules=(ConvRule("r", "A", "Missing", such_that=lambda i, e: True),))
