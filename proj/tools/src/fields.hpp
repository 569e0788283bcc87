#pragma once

#include "dcmgnn_cli/cli.hpp"

namespace dcmgnn::cli {

// Calls fn(name, help, member) for every RunConfig option, in the order used
// by --help and by serialize(). Names use '-' separators.
template <class Config, class Fn>
void for_each_field(Config& c, Fn&& fn) {
  fn("data", "interaction file (user<TAB>item<TAB>relation)", c.data);
  fn("relations", "comma-separated relation names", c.relations);
  fn("target", "target relation", c.target);
  fn("canonical-order", "behavior order for chains (default: relations, target last)", c.canonical_order);
  fn("split-ratio", "fraction of target edges kept for training", c.split_ratio);
  fn("seed", "run seed", c.seed);
  fn("out", "run directory (default: $DCMGNN_OUT_ROOT/<data>-seed<seed>)", c.out);
  fn("workers", "worker threads for row-parallel kernels", c.workers);
  fn("dim", "embedding size", c.dim);
  fn("layers", "propagation layers", c.layers);
  fn("lr", "Adam learning rate", c.lr);
  fn("batch-size", "target edges per batch", c.batch_size);
  fn("epochs", "maximum epochs", c.epochs);
  fn("eval-every", "evaluate every N epochs", c.eval_every);
  fn("patience", "early-stopping patience in epochs (0 disables)", c.patience);
  fn("stop-k", "cutoff of the early-stopping recall", c.stop_k);
  fn("lambda", "L2 weight", c.lambda);
  fn("mu1", "weight of the contrastive loss", c.mu1);
  fn("mu2", "weight of the final BPR loss", c.mu2);
  fn("tau", "contrastive temperature", c.tau);
  fn("mu-scale", "scale of the loss block in chain encoder features", c.mu_scale);
  fn("leaky-slope", "negative slope of the encoders", c.leaky_slope);
  fn("init-std", "std of the initial embedding rows", c.init_std);
  fn("ks", "comma-separated ranking cutoffs", c.ks);
  fn("raw-local-adj", "skip symmetric normalization of the local adjacency", c.raw_local_adj);
  fn("separate-base", "separate base tables for the local and global channels", c.separate_base);
  fn("per-user-weights", "per-user loss weights instead of batch-level weights", c.per_user_weights);
  fn("chain-score", "chain BPR score: last | aggregated", c.chain_score);
  fn("global-norm", "global similarity normalization: row | symmetric", c.global_norm);
  fn("chain-order", "comma-separated relation order used inside every chain", c.chain_order);
  fn("csv", "also write metrics.csv", c.csv);
  fn("resume", "continue from <out>/checkpoint.txt", c.resume);
  fn("checkpoint-every", "also checkpoint every N epochs (0: only at the end)", c.checkpoint_every);
  fn("checkpoint", "checkpoint to evaluate (default: <out>/checkpoint.txt)", c.checkpoint);
  fn("use-last", "evaluate the last parameters instead of the best ones", c.use_last);
}

template <class Config, class Fn>
void for_each_synth_field(Config& c, Fn&& fn) {
  fn("users", "number of users", c.users);
  fn("items", "number of items", c.items);
  fn("clusters", "taste clusters shared by users and items", c.clusters);
  fn("views", "views per user", c.views);
  fn("carts", "carts per user, drawn from the user's views", c.carts);
  fn("buys", "buys per user", c.buys);
  fn("cluster-bias", "probability that a view stays in the user's cluster", c.cluster_bias);
  fn("cascade", "probability that a buy comes from the user's cart", c.cascade);
  fn("seed", "generator seed", c.seed);
  fn("out", "output directory", c.out);
}

}  // namespace dcmgnn::cli
