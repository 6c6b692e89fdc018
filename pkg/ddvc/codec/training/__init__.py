from ddvc.codec.training.dataset import FolderTripletDataset, SyntheticTriplets, make_synthetic_dataset, split_dataset
from ddvc.codec.training.loss import LossTerms, rd_loss
from ddvc.codec.training.prefetch import BatchPrefetcher
from ddvc.codec.training.trainer import StageResult, train_stage

__all__ = [
    "BatchPrefetcher",
    "FolderTripletDataset",
    "LossTerms",
    "StageResult",
    "SyntheticTriplets",
    "make_synthetic_dataset",
    "rd_loss",
    "split_dataset",
    "train_stage",
]
