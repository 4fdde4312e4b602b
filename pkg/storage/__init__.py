from .checkpoints import CheckpointStore, Checkpoint

__all__ = ["CheckpointStore", "Checkpoint"]
