#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lire/losses.hpp"

namespace lire {

/// Finite-difference verification harness over seeded toy instances of every
/// trainable objective:
///   infonce_pooled  - bidirectional InfoNCE through pooling and projection
///   kl_maxsim       - KL distillation through MaxSim and projection
///   mrl_aggregate   - both objectives aggregated across dims, separate heads
///   mrl_e_aggregate - same through prefix truncations of one weight matrix
///
/// Instances are rebuilt from recorded seeds; candidates whose MaxSim top-2
/// or min-max endpoint margins are too small for an unambiguous subgradient
/// are rejected and the seed advanced, so every checked instance is smooth
/// within the finite-difference step.
struct GradCheckCase {
    uint64_t instance_seed;
    GradCheckReport report;
};

struct GradCheckSuite {
    std::string loss_name;
    std::vector<GradCheckCase> cases;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckRun {
    double h;
    double tol;
    std::vector<GradCheckSuite> suites;
    bool negative_control_detected = false; // corrupted gradient must fail
    bool pass = false;

    std::string to_json() const;
};

GradCheckRun run_gradient_checks(uint64_t seed, int instances_per_loss = 20, double h = 1e-4,
                                 double tol = 1e-4);

} // namespace lire
