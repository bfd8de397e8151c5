#pragma once

#include "atlab/attack.hpp"

#include <optional>
#include <string>

namespace atlab {

// One evaluated adversarial example: both models classified x as y, and the
// source model F1 misclassified x_adv as y1 != y.
struct EligibleItem {
  Tensor x;
  Tensor x_adv;
  int y = 0;
  int y1 = 0;
  Index source_index = -1;       // position in the sampled dataset
  std::optional<int> intended_target;  // set for targeted attacks
};

enum class Outcome { Unfooled, DifferentMistake, SameMistake };

std::string outcome_name(Outcome o);

struct TransferReport {
  std::string f1_id, f2_id;
  std::string dataset_id;
  AttackSpec attack;
  Index n_eligible = 0;
  Index unfooled = 0;
  Index different_mistake = 0;
  Index same_mistake = 0;
  // Ratios are empty when n_eligible == 0; silent zeros would corrupt
  // downstream correlations.
  std::optional<double> unfooled_ratio, different_ratio, same_ratio;
  std::optional<double> fooled_ratio;
  // Targeted-attack bookkeeping: how many eligible items had y1 equal to the
  // intended target (same-mistake on those reads as targeted transferability).
  Index y1_equals_target = 0;
  Index same_mistake_on_target = 0;
  // Raw (y1, F2-label) pairs for external class-wise analysis.
  std::vector<std::pair<int, int>> mistake_pairs;
};

// Seeded draw without replacement of up to sample_n images with
// F1(x) = F2(x) = y, attacked on F1; keeps the ones with F1(x') != y.
// targets_out, when non-null, receives the attack's intended targets for the
// kept items (targeted objectives only).
std::vector<EligibleItem> build_eligible_set(const NetworkModel& f1, const NetworkModel& f2,
                                             const LabeledDataset& data, const AttackSpec& attack,
                                             Index sample_n, std::uint64_t seed, int threads = 0);

Outcome classify_outcome(const NetworkModel& f2, const EligibleItem& item);

// Re-check the three defining predicates of an eligible item.
bool verify_eligible(const NetworkModel& f1, const NetworkModel& f2, const EligibleItem& item);

TransferReport transfer_report(const NetworkModel& f1, const NetworkModel& f2,
                               const std::vector<EligibleItem>& eligible,
                               const AttackSpec& attack, int threads = 0);

// Pearson product-moment correlation; empty on zero variance.
std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Pinned CSV schema (LF line endings, '.' decimal):
// f1_id,f2_id,attack_family,objective,epsilon,steps,n_eligible,unfooled,
// different,same,unfooled_ratio,different_ratio,same_ratio
std::string transfer_report_csv_header();
std::string transfer_report_csv_row(const TransferReport& r);
std::string transfer_report_json(const TransferReport& r);

}  // namespace atlab
