import numpy as np
from zsre.dataset import SyntheticConfig, generate_synthetic, make_zero_shot_split
from zsre.encoding import attribute_matrix, encode_tokens
from zsre.head import forward
from zsre.optim import TrainConfig, train
from zsre.inference import build_relation_index, predict

cfg = SyntheticConfig()
instances, relations = generate_synthetic(cfg)
tc = TrainConfig(seed=3)  # the collapsed repeat
split = make_zero_shot_split(instances, relations, 3, 3)
params, _ = train(instances, relations, split, tc)
h = params.head.hidden_size
unseen = sorted(split.unseen_ids)
index = build_relation_index(relations, unseen, "identity", 64, "neg_inner_product")

# mean entity-channel activation over training data (as a neutral stand-in)
ent_acts = []
for i in split.train_idx[:200]:
    inst = instances[i]
    t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
    ent_acts.append(np.concatenate([t.ent1, t.ent2]))
mean_ent = np.mean(ent_acts, axis=0)

correct_full, correct_neut = 0, 0
for i in split.test_idx:
    inst = instances[i]
    t = forward(inst, encode_tokens(inst, params.vocab, params.encoder), params.head)
    # full path
    pred_full = predict(t.a_hat, index).relation_id
    # neutralized entity channels
    concat = np.concatenate([t.h0_proj, mean_ent])
    a_hat_neut = params.head.out_weight @ np.tanh(concat) + params.head.out_bias
    pred_neut = predict(a_hat_neut, index).relation_id
    correct_full += pred_full == inst.relation_id
    correct_neut += pred_neut == inst.relation_id
n = len(split.test_idx)
print(f"test accuracy full: {correct_full/n:.3f}   entity-neutralized: {correct_neut/n:.3f}")

# how big are the entity channels' W1 columns vs the CLS channel's?
W1 = params.head.out_weight
print("W1 column norms: cls", np.linalg.norm(W1[:, :h]),
      "ent1", np.linalg.norm(W1[:, h:2*h]), "ent2", np.linalg.norm(W1[:, 2*h:]))
