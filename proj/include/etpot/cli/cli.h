#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace etpot::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,        // bad flags, unknown preset, invalid configuration
  kMissingFile = 3,  // an input path does not exist
  kDivergence = 4,   // training produced a non-finite loss
};

/// Runs one command. `args` excludes the program name, e.g.
/// {"train", "--preset", "tiny", "--seed", "7", "--data", "d.manifest", "--out", "run"}.
///
///   gen-data  --seed S --out DIR [--config SPEC]
///             DIR/data.xyz, DIR/data.manifest
///   train     --seed S --data MANIFEST --out DIR [--preset P] [--config FILE]
///             [--exclude-elements H,..] [--head H] [--no-equivariance]
///             [--neighbor-embedding-mode M]
///             DIR/metrics.jsonl, timing.jsonl, best.ckpt, last.ckpt
///   eval      --checkpoint CKPT --data MANIFEST --out DIR [--exclude-elements ..]
///             DIR/eval.tsv
///   analyze   --checkpoint CKPT --data MANIFEST --out DIR [--seed S]
///             [--config FILE] [--exclude-elements ..]
///             DIR/pair_scores.tsv, pair_scores_signed.tsv, pair_scores_abs.tsv,
///             bond_probabilities.tsv, bond_matrix.tsv, displacement.tsv,
///             rollout_0.tsv, attention_layer0_0.tsv
///
/// Every command also writes DIR/resolved_config.txt.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace etpot::cli
