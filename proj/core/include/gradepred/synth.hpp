#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gradepred/types.hpp"

namespace gradepred {

enum class SynthKind {
    planted_linear,  // grades follow sparse nonneg regressions on prerequisites
    planted_lowrank, // grades follow a biased low-rank factor model
    planted_bias,    // low-rank model with rank 0 (biases only)
    two_cluster,     // two populations with distinct linear models and electives
};

std::string_view synth_kind_name(SynthKind kind);
std::optional<SynthKind> parse_synth_kind(std::string_view name);

/// Configuration of the generator. Students enroll along a term-ordered
/// prerequisite DAG starting at staggered terms, so the observation
/// pattern is structured rather than uniform (the not-missing-at-random
/// shape of real transcripts).
struct SynthConfig {
    int n_students = 200;
    int n_courses = 40;
    int n_terms = 8;
    int n_levels = 0; // 0 = derive as max(2, n_terms / 2)
    SynthKind kind = SynthKind::planted_linear;
    double noise_sigma = 0.3;
    int courses_per_term_min = 2;
    int courses_per_term_max = 4;
    double prereq_density = 0.25;
    int rank = 2;                    // planted_lowrank only
    double core_fraction = 0.3;      // share of each level's courses everyone takes
    double elective_prob_own = 0.6;  // chance of taking an own-pool elective
    double elective_prob_other = 0.08;
    std::uint64_t seed = 42;

    int levels() const { return n_levels > 0 ? n_levels : std::max(2, n_terms / 2); }
};

/// One course's planted linear model: grade = w0 + sum over taken
/// prerequisites of weight * prior grade (+ noise).
struct PlantedLinear {
    double w0 = 0.0;
    std::map<std::string, double> weights;
};

/// Everything a test needs to verify recovery against the generator.
struct SynthTruth {
    SynthKind kind = SynthKind::planted_linear;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    double clip_rate = 0.0; // fraction of grades pulled back into [0,4]
    std::map<std::string, int> course_level;
    std::map<std::string, std::vector<std::string>> prereqs;
    std::map<std::string, char> student_cluster; // 'A' or 'B'
    std::map<std::string, PlantedLinear> linear_a;
    std::map<std::string, PlantedLinear> linear_b; // two_cluster only
    // low-rank truth (planted_lowrank / planted_bias)
    double mu = 0.0;
    int rank = 0;
    std::map<std::string, double> student_bias;
    std::map<std::string, double> course_bias;
    std::map<std::string, std::vector<double>> p;
    std::map<std::string, std::vector<double>> q;
};

struct SynthResult {
    std::vector<GradeRecord> records;
    SynthTruth truth;
};

/// Deterministic under seed: identical config gives byte-identical records.
SynthResult generate(const SynthConfig& config);

} // namespace gradepred
