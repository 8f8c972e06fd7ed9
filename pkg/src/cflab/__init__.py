"""cflab: desk-scale cell-free MU-MIMO uplink simulator with an O-RAN
style E2 control plane and a DQN antenna-association xApp."""

__version__ = "0.1.0"
