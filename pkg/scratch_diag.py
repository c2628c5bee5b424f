import numpy as np
from zsre.dataset import SyntheticConfig, generate_synthetic, make_zero_shot_split
from zsre.encoding import attribute_matrix
from zsre.optim import TrainConfig, train
from zsre.inference import embed_new_sentence, build_relation_index, predict
from zsre.evaluation import compute_metrics

cfg = SyntheticConfig()
instances, relations = generate_synthetic(cfg)
tc = TrainConfig(seed=0)
split = make_zero_shot_split(instances, relations, 3, 0)
params, hist = train(instances, relations, split, tc)
print("loss first/last:", hist.epochs[0].total, hist.epochs[-1].total)

# train-side fit: NN over seen attributes on training sentences
seen = sorted(split.seen_ids)
index_seen = build_relation_index(relations, seen, "identity", 64, "neg_inner_product")
gold, pred = [], []
for i in split.train_idx[:300]:
    inst = instances[i]
    a = embed_new_sentence(inst, params.vocab, params.encoder, params.head)
    gold.append(inst.relation_id), pred.append(predict(a, index_seen).relation_id)
acc = np.mean([g == p for g, p in zip(gold, pred)])
print("train-side NN accuracy over seen:", acc)

# test-side: alignment scores with each unseen attribute
unseen = sorted(split.unseen_ids)
attrs_u = attribute_matrix(relations, unseen, "identity", 64)
print("unseen pairwise attr dots:\n", np.round(attrs_u @ attrs_u.T, 3))
per_rel = {}
for i in split.test_idx:
    inst = instances[i]
    a = embed_new_sentence(inst, params.vocab, params.encoder, params.head)
    per_rel.setdefault(inst.relation_id, []).append(attrs_u @ a)
for rel in unseen:
    scores = np.mean(per_rel[rel], axis=0)
    print(rel, "mean scores vs", unseen, "->", np.round(scores, 2))
