"""Decoy service implementations and their registry.

Each decoy type is a small TCP service that emulates one attack surface,
reports everything it sees to the shared session store, and embeds the
store's decorations (operator messages, clues) into its responses.
"""

from decoyweaver.decoys.base import DecoyContext, TcpDecoy
from decoyweaver.decoys.ftp import FtpDepotDecoy
from decoyweaver.decoys.http_shop import HttpShopDecoy
from decoyweaver.decoys.iot import MqttBrokerDecoy, SshEmuDecoy

#: decoy type name (as used in a bundle's runtime.json) -> implementation
DECOY_TYPES = {
    "http_shop": HttpShopDecoy,
    "ftp_depot": FtpDepotDecoy,
    "ssh_emu": SshEmuDecoy,
    "mqtt_broker": MqttBrokerDecoy,
}

__all__ = [
    "DECOY_TYPES",
    "DecoyContext",
    "FtpDepotDecoy",
    "HttpShopDecoy",
    "MqttBrokerDecoy",
    "SshEmuDecoy",
    "TcpDecoy",
]
