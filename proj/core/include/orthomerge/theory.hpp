#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orthomerge/finetune.hpp"
#include "orthomerge/synth.hpp"

namespace ortho {

/// One numeric check inside a validator. Non-asserted checks are
/// reported for inspection but do not affect the verdict.
struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool pass = true;
    bool asserted = true;
};

struct ValidationReport {
    std::string name;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<Check> checks;
    std::map<std::string, double> stats;
    bool passed = true;

    void add(const std::string& check_name, double value, double bound,
             bool pass, bool asserted = true);
    std::string summary() const;
};

/// ||W||_F^2 <= d + sqrt(d*xi) with xi = ||W^T W - I||_F^2, over random
/// matrices, plus the constructed equality case.
ValidationReport validate_norm_bound(std::size_t trials, std::size_t m,
                                     std::size_t d, std::uint64_t seed);

/// ||P - I||_F <= ||P^2 - I||_F for random PSD matrices.
ValidationReport validate_psd_inequality(std::size_t trials, std::size_t d,
                                         std::uint64_t seed);

/// Tr(A^T B) over independent Haar pairs has mean 0 within 3 standard
/// errors; variance reported against a matched-norm Gaussian baseline.
ValidationReport validate_stiefel_inner(std::size_t trials, std::size_t m,
                                        std::size_t d, std::uint64_t seed);

/// E = P - I from the polar factor obeys ||E||_F <= ||P^2 - I||_F, and
/// the cross term |<vec(Q), vec(Q' E')>| <= sqrt(d) ||E'||_F.
ValidationReport validate_polar_error_terms(std::size_t m, std::size_t d,
                                            const std::vector<double>& xi_levels,
                                            std::size_t pairs, std::uint64_t seed);

/// Shared setup for the end-to-end validators.
struct SuiteExperiment {
    SynthTaskSpec suite;
    std::vector<std::size_t> hidden_dims;
    TrainConfig train;
    std::vector<std::uint64_t> seeds;  // one run per seed
};
SuiteExperiment default_tfs_experiment();
SuiteExperiment default_angle_experiment();
std::vector<double> default_angle_lambda_grid();

/// Jacobian consistency ratio sigma_J^2/||mu_J||^2 and the alignment of
/// J(x) with a fine-tuned task vector. The alignment assertion is
/// conditional on the ratio being < 1.
ValidationReport validate_directional_alignment(const SuiteExperiment& cfg);

/// TFS construction chain on a rho=0 suite: unused-feature row mass,
/// interference cosine, disentanglement gap, plus a rho=1 control run
/// whose interference must be materially larger.
ValidationReport validate_tfs_chain(const SuiteExperiment& cfg);

/// Penalty angle control: at the selected lambda the inter-task cosine
/// median drops and the alpha-searched normalized accuracy median rises
/// relative to lambda = 0.
ValidationReport validate_angle_control(
    const SuiteExperiment& cfg,
    const std::vector<double>& lambda_grid = default_angle_lambda_grid());

}  // namespace ortho
