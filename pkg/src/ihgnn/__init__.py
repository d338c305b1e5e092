__version__ = "0.1.0"

# from .graph import Graph, Dataset
# from .model import IHGNNConfig, IHGNNModel, Variant
