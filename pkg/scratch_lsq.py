import numpy as np
from zsre.dataset import SyntheticConfig, generate_synthetic, make_zero_shot_split
from zsre.encoding import attribute_matrix, encode_tokens
from zsre.head import forward
from zsre.optim import TrainConfig, train
from zsre.inference import build_relation_index, predict

cfg = SyntheticConfig()
instances, relations = generate_synthetic(cfg)
SEED = 1
tc = TrainConfig(seed=SEED)
split = make_zero_shot_split(instances, relations, 3, SEED)
params, _ = train(instances, relations, split, tc)
unseen = sorted(split.unseen_ids)
index = build_relation_index(relations, unseen, "identity", 64, "neg_inner_product")
classes = params.classes
attrs_all = attribute_matrix(relations, sorted(relations), "identity", 64)
rel_order = sorted(relations)

def cls_of(i):
    inst = instances[i]
    enc = encode_tokens(inst, params.vocab, params.encoder)
    return enc.hidden[0], inst

# fit linear map CLS -> attribute on training data
X, Y = [], []
for i in split.train_idx:
    c, inst = cls_of(i)
    X.append(c)
    Y.append(attrs_all[rel_order.index(inst.relation_id)])
X = np.array(X); Y = np.array(Y)
Xb = np.hstack([X, np.ones((len(X), 1))])
W, *_ = np.linalg.lstsq(Xb, Y, rcond=None)

correct_lsq = correct_model = 0
sat = []
for i in split.test_idx:
    c, inst = cls_of(i)
    a_lsq = np.hstack([c, 1.0]) @ W
    correct_lsq += predict(a_lsq, index).relation_id == inst.relation_id
    t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
    correct_model += predict(t.a_hat, index).relation_id == inst.relation_id
    sat.append(np.mean(np.abs(t.tanh_concat) > 0.95))
n = len(split.test_idx)
print(f"seed {SEED}: model acc={correct_model/n:.3f}  linear-probe acc={correct_lsq/n:.3f}")
print(f"tanh(concat) saturation fraction at test: {np.mean(sat):.3f}")

# train-side comparison
correct_lsq_tr = 0
for i in split.train_idx[:200]:
    c, inst = cls_of(i)
    a_lsq = np.hstack([c, 1.0]) @ W
    pred = rel_order[int(np.argmax(attrs_all @ a_lsq))]
    correct_lsq_tr += pred == inst.relation_id
print("linear-probe train acc (12-way):", correct_lsq_tr / 200)
