#pragma once

// Randomized invariant suites shared by the `verify` command and the tests.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ape/attention.hpp"
#include "ape/random.hpp"

namespace ape {

struct SuiteReport {
    std::string suite;
    std::int64_t trials = 0;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifyOptions {
    std::uint64_t seed = 0x5eed;
    std::int64_t trials = 100;
    /// Restricts the suites that draw a dimension; empty means their defaults.
    std::vector<Index> dims;
    std::optional<double> tolerance_override;
    /// Debug aid: perturbs one generator off the orthogonal group.
    bool inject_non_orthogonal = false;
};

std::vector<std::string> suite_names();

/// Throws InvalidParameter for an unknown suite name.
SuiteReport run_suite(const std::string& name, const VerifyOptions& options);

std::string to_json(const std::vector<SuiteReport>& reports);

// Sampling helpers.

/// Random path of the given structure; tree words are returned unreduced.
PathWord random_path(const StructureSpec& spec, Rng& rng, int max_length = 12, std::int64_t max_offset = 40);

/// `count` distinct absolute positions. Sequences draw indices below
/// `max_index`, trees draw branch words of depth at most `max_depth`, grids
/// draw coordinates below `max_index` on each axis.
std::vector<AbsolutePosition> random_positions(const StructureSpec& spec, std::size_t count, Rng& rng,
                                               std::int64_t max_index = 16, int max_depth = 4);

/// Letter-by-letter product of an unreduced tree word.
Matrix naive_word_product(const TreeWordLetters& word, const GroupInterpretation& g);

/// Central finite-difference gradient of sum(upstream .* scores) with respect
/// to every parameter entry.
std::vector<Matrix> finite_difference_gradient(const AttentionBatch& batch, const StructureSpec& spec,
                                               const std::vector<GeneratorParam>& params,
                                               const std::vector<AbsolutePosition>& query_positions,
                                               const std::vector<AbsolutePosition>& key_positions,
                                               const Matrix& upstream, double step = 1e-5);

/// Product count bound for a ladder up to p: 2 ceil(log2 p) + 1 (1 when p <= 1).
std::size_t ladder_product_bound(std::int64_t p);

}  // namespace ape
