#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdprop/iterative.hpp"
#include "bdprop/net.hpp"
#include "bdprop/system.hpp"

namespace bdprop {

enum class SolverChoice { Substitution, Cyclic, Jacobi, Richardson, BiCGStab, Hybrid };

std::string solver_name(SolverChoice solver, OuterMethod outer, InnerSolver inner);

struct ExperimentSpec {
  std::string kind = "fnn";  // fnn | rnn
  std::vector<std::size_t> widths;  // n_0 .. n_l
  std::size_t tau = 1;
  std::size_t batch = 1;
  ActivationKind activation;
  PropMode mode = PropMode::Backward;
  SolverChoice solver = SolverChoice::Substitution;
  OuterMethod hybrid_outer = OuterMethod::Jacobi;
  InnerSolver hybrid_inner = InnerSolver::Substitution;
  IterationConfig iter;
  std::size_t leaf_threshold = 2;
  std::uint64_t seed = 1;
  std::optional<unsigned> gamma_override;
  double verify_tol = 1e-9;

  std::size_t depth() const { return widths.size() - 1; }
  unsigned gamma() const {
    return gamma_override ? *gamma_override : activation_gamma(activation);
  }
  void validate() const;
};

/// Weights and biases drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)]
/// with a SplitMix64 stream seeded by spec.seed; identical across platforms.
FeedForwardNet generate_fnn(const ExperimentSpec& spec);
RecurrentNet generate_rnn(const ExperimentSpec& spec);

struct PredictedWork {
  std::uint64_t fma = 0;
  std::uint64_t activation_weighted = 0;  // gamma-weighted scaling term
  std::uint64_t parallel_steps = 0;
  std::uint64_t total() const { return fma + activation_weighted; }
};

/// Closed-form operation counts for a solve of this spec; eta supplies the
/// iteration count for iterative methods.
PredictedWork predict_work(const ExperimentSpec& spec, SolverChoice method, std::size_t eta);

struct ExperimentReport {
  ExperimentSpec spec;
  double oracle_max_abs_err = 0.0;
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  std::size_t recursion_depth = 0;
  std::size_t restarts = 0;
  bool converged = true;
  bool verified = false;
  std::size_t delta_vectors = 0;
  WorkCounters work;
  PredictedWork predicted;
  double wall_ms = 0.0;
  std::string breakdown;  // empty when no Breakdown occurred
};

/// Generates the network and data for the spec, builds the system(s), runs
/// the chosen solver, and verifies against the sequential oracle.
ExperimentReport run_experiment(const ExperimentSpec& spec);

struct StaleRun {
  double sigma = 0.0;
  double max_abs_err = 0.0;
  bool breakdown = false;
};

/// Forward approximation with stale diagonals: diagonals come from the
/// unperturbed network's trace, couplings and rhs from a weight-perturbed
/// copy; the result is compared against the perturbed network's true
/// forward pass.
StaleRun stale_diagonal_run(const ExperimentSpec& spec, double sigma);

struct AppendixReport {
  ExperimentSpec spec;
  double matrix_deviation = 0.0;
  double rhs_deviation = 0.0;
  double literal_matrix_deviation = 0.0;
  bool ok = false;
};

AppendixReport run_appendix_check(const ExperimentSpec& spec);

// --- serialization -------------------------------------------------------

std::string net_to_json(const FeedForwardNet& net);
std::string net_to_json(const RecurrentNet& net);

struct ParsedNet {
  bool is_rnn = false;
  FeedForwardNet fnn;
  RecurrentNet rnn;
};

ParsedNet net_from_json(const std::string& text);

std::string spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const std::string& text);

std::string report_to_json(const ExperimentReport& report);
std::string appendix_report_to_json(const AppendixReport& report);
std::string stale_report_to_json(const ExperimentSpec& spec,
                                 const std::vector<StaleRun>& runs);

std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& report);

}  // namespace bdprop
