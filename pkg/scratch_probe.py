import numpy as np
from zsre.dataset import SyntheticConfig, generate_synthetic, make_zero_shot_split
from zsre.encoding import attribute_matrix, encode_tokens
from zsre.head import forward
from zsre.optim import TrainConfig, train
from zsre.inference import build_relation_index, predict

cfg = SyntheticConfig()
instances, relations = generate_synthetic(cfg)
SEED = 1
split = make_zero_shot_split(instances, relations, 3, SEED)
unseen = sorted(split.unseen_ids)
rel_order = sorted(relations)
attrs_all = attribute_matrix(relations, rel_order, "identity", 64)
index = build_relation_index(relations, unseen, "identity", 64, "neg_inner_product")

def test_acc(params):
    ok = 0
    for i in split.test_idx:
        inst = instances[i]
        t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
        ok += predict(t.a_hat, index).relation_id == inst.relation_id
    return ok / len(split.test_idx)

def probes(params):
    X_cls, X_cat, Y = [], [], []
    for i in split.train_idx:
        inst = instances[i]
        t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
        X_cls.append(np.tanh(t.encoded.hidden[0]))
        X_cat.append(t.tanh_concat)
        Y.append(attrs_all[rel_order.index(inst.relation_id)])
    sol = {}
    for name, X in (("cls", X_cls), ("concat", X_cat)):
        X = np.array(X); Xb = np.hstack([X, np.ones((len(X), 1))])
        W, *_ = np.linalg.lstsq(Xb, np.array(Y), rcond=None)
        ok = 0
        for i in split.test_idx:
            inst = instances[i]
            t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
            feat = np.tanh(t.encoded.hidden[0]) if name == "cls" else t.tanh_concat
            a = np.hstack([feat, 1.0]) @ W
            ok += predict(a, index).relation_id == inst.relation_id
        sol[name] = ok / len(split.test_idx)
    return sol

for label, tc in [
    ("desk50", TrainConfig(seed=SEED)),
    ("alpha0", TrainConfig(seed=SEED, alpha=0.0)),
    ("epochs200", TrainConfig(seed=SEED, epochs=200)),
]:
    params, _ = train(instances, relations, split, tc)
    acc = test_acc(params)
    pr = probes(params)
    print(f"{label:<10} model={acc:.3f}  lsq(cls)={pr['cls']:.3f}  lsq(concat)={pr['concat']:.3f}")
