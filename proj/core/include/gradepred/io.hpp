#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gradepred/evaluation.hpp"
#include "gradepred/synth.hpp"
#include "gradepred/types.hpp"

namespace gradepred {

/// Sparse-triplet text format for cached course datasets: a header with
/// the target course, k and centering, row lines carrying student id,
/// target (and GPA when centered), column lines carrying course ids, then
/// one `e row col value` line per observed entry. Exact round trip.
void save_dataset(std::ostream& out, const CourseDataset& ds);
CourseDataset load_dataset(std::istream& in);

/// Text format for estimated models (linear and completion). Values are
/// written as shortest round-trip decimals, so save/load is exact.
void save_linear_model(std::ostream& out, const LinearModel& model);
LinearModel load_linear_model(std::istream& in);
void save_mf_model(std::ostream& out, const MfModel& model);
MfModel load_mf_model(std::istream& in);

/// Predictions CSV: student,course,method,predicted[,actual].
void write_predictions(std::ostream& out, const std::vector<ScoredPrediction>& predictions,
                       bool with_actual = true);
void write_predictions(std::ostream& out, const std::vector<Prediction>& predictions);

/// Planted-parameter sidecar emitted next to simulated records; consumed
/// only by tests and verification tooling.
void save_truth(std::ostream& out, const SynthTruth& truth);
SynthTruth load_truth(std::istream& in);

/// 64-bit FNV-1a of a stream, used to key the dataset cache by input.
std::uint64_t content_hash(std::istream& in);

} // namespace gradepred
