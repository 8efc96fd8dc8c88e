from pushrl.comms.channel import (
    DEFAULT_DEPTH, Channel, ChannelClosed, ChannelStats, EndOfStream, ParamSubscription,
)
from pushrl.comms.codec import (
    HEADER_SIZE, CodecError, Envelope, Kind, decode, decode_control, decode_params,
    decode_trajectory, encode, encode_control, encode_params, encode_trajectory,
)
from pushrl.comms.tcp import TcpChannel

TRANSPORTS = ("inproc", "tcp")


def make_channel(transport: str = "inproc", depth: int = DEFAULT_DEPTH, mode: str = "queue"):
    if transport == "inproc":
        return Channel(depth, mode)
    if transport == "tcp":
        return TcpChannel(depth, mode)
    raise ValueError(f"unknown transport {transport!r}; expected one of {TRANSPORTS}")


def push_send(ch, e: Envelope) -> None:
    ch.push_send(e)


def probe_recv(ch):
    return ch.probe_recv()


def params_latest(sub: ParamSubscription):
    return sub.params_latest()


__all__ = [
    "DEFAULT_DEPTH", "HEADER_SIZE", "TRANSPORTS", "Channel", "ChannelClosed", "ChannelStats",
    "CodecError", "EndOfStream", "Envelope", "Kind", "ParamSubscription", "TcpChannel",
    "decode", "decode_control", "decode_params", "decode_trajectory", "encode",
    "encode_control", "encode_params", "encode_trajectory", "make_channel", "params_latest",
    "probe_recv", "push_send",
]
