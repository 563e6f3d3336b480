"""Train on the shipped paraphrase retrieval task at desk defaults.

    python demos/paraphrase_sanity.py

Prints the smoothed loss every 50 steps and recall@1 on held-out queries
before and after training.
"""

from pathlib import Path

from hybrid_embed.encoder import Encoder, EncoderConfig, init_params
from hybrid_embed.evaluation import recall_at_k
from hybrid_embed.toy import load_paraphrase
from hybrid_embed.trainer import TrainConfig, ema, train

SUITE = Path(__file__).resolve().parents[1] / "data" / "toy_suite"


def main():
    train_set, ev = load_paraphrase(SUITE)
    enc_cfg, cfg = EncoderConfig(), TrainConfig()
    untrained = Encoder(init_params(enc_cfg, cfg.seed), enc_cfg)
    print(f"untrained recall@1 = {recall_at_k(untrained, ev, enc_cfg.out_dim):.3f}")

    ckpt, log = train([train_set], enc_cfg, cfg)
    smooth = ema([r.loss for r in log], 50)
    for r, s in zip(log, smooth):
        if r.step == 1 or r.step % 50 == 0:
            print(f"step {r.step:4d}  lr {r.lr:.5f}  loss {r.loss:.4f}  ema {s:.4f}")
    print(f"trained recall@1 = {recall_at_k(ckpt.encoder(), ev, enc_cfg.out_dim):.3f}")


if __name__ == "__main__":
    main()
