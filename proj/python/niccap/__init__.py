try:
    from . import _niccap as _m
except ImportError:  # development layout: extension on PYTHONPATH, not in-package
    import _niccap as _m

CaptionedExample = _m.CaptionedExample
Checkpoint = _m.Checkpoint
DatasetSplits = _m.DatasetSplits
SamplingSchedule = _m.SamplingSchedule
SceneSpec = _m.SceneSpec
TrainConfig = _m.TrainConfig
Vocabulary = _m.Vocabulary
caption_log_prob = _m.caption_log_prob
decode = _m.decode
embedding_neighbors = _m.embedding_neighbors
evaluate = _m.evaluate
generate_dataset = _m.generate_dataset
gradcheck = _m.gradcheck
load_checkpoint = _m.load_checkpoint
load_dataset = _m.load_dataset
novelty_rate = _m.novelty_rate
perplexity = _m.perplexity
rank_captions = _m.rank_captions
save_checkpoint = _m.save_checkpoint
save_dataset = _m.save_dataset
tokenize = _m.tokenize
train = _m.train

__all__ = [
    "CaptionedExample",
    "Checkpoint",
    "DatasetSplits",
    "SamplingSchedule",
    "SceneSpec",
    "TrainConfig",
    "Vocabulary",
    "caption_log_prob",
    "decode",
    "embedding_neighbors",
    "evaluate",
    "generate_dataset",
    "gradcheck",
    "load_checkpoint",
    "load_dataset",
    "novelty_rate",
    "perplexity",
    "rank_captions",
    "save_checkpoint",
    "save_dataset",
    "tokenize",
    "train",
]
