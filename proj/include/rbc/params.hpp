#pragma once

// Physical parameters, their nondimensional reduction, the homogenized
// temperature variable, the background profile for the heat-flux bound, and
// the flat key=value experiment configuration.

#include <cstdint>
#include <string>
#include <vector>

#include "rbc/grid.hpp"

namespace rbc {

// Dimensional inputs. All strictly positive except gamma_tilde (velocity
// forcing strength), which may be zero.
struct PhysicalParams {
    double nu = 0;          // kinematic viscosity
    double kappa = 0;       // thermal diffusivity
    double g = 0;           // gravity
    double alpha = 0;       // thermal expansion coefficient
    double gamma = 0;       // temperature forcing strength
    double gamma_tilde = 0; // velocity forcing strength (>= 0)
    double h = 0;           // layer height
    double t1 = 0;          // bottom-wall temperature excess
    double l_phys = 0;      // horizontal period
    int d = 2;              // spatial dimension (2 or 3)

    std::vector<std::string> validate() const;
};

struct NondimParams {
    double pr = 1;               // nu / kappa
    double ra = 1;               // g alpha gamma h^(4-d/2) / (nu kappa^(3/2))
    double ra_tilde = 1;         // sqrt(kappa) h^(d/2-1) T1 / gamma
    double aspect = 2;           // l_phys / h
    int n1 = 0;                  // velocity noise mode count
    int n2 = 0;                  // temperature noise mode count
    double sigma_tilde_norm = 0; // velocity noise strength; 0 iff n1 == 0

    std::vector<std::string> validate() const;
};

// Throws std::invalid_argument naming every offending field if the inputs are
// invalid.
NondimParams nondimensionalize(const PhysicalParams& p, int n1, int n2);

// theta = T - ra_tilde * (1 - z): homogenizes the wall values.
void temperature_to_theta(const Grid& g, double ra_tilde, const Field& temperature, Field& theta);
void theta_to_temperature(const Grid& g, double ra_tilde, const Field& theta, Field& temperature);

// Background profile tau(z): ra_tilde at z=0 falling to 0 across a boundary
// layer of width delta = min(1, 1/sqrt(2 ra ra_tilde)), shaped by the
// mollifier psi(s) = 30 s^2 (1-s)^2 (unit mass, int psi^2 = 10/7).
struct BackgroundProfile {
    double ra_tilde = 0;
    double delta = 1;

    double tau(double z) const;
    double dtau(double z) const;
    // int_0^1 tau'(z)^2 dz = (ra_tilde^2 / delta) * 10/7, exactly.
    double grad_sq_integral() const { return ra_tilde * ra_tilde / delta * (10.0 / 7.0); }
};

BackgroundProfile build_background_profile(double ra, double ra_tilde);

// --- experiment configuration ----------------------------------------------

// Flat key=value configuration ('#' starts a comment). Unknown keys are a
// hard error; parse errors collect every offending line before throwing.
struct ExperimentConfig {
    // physics
    double pr = 1.0;
    double ra = 1.0;
    double ra_tilde = 1.0;
    double aspect = 2.0;
    double sigma_tilde_norm = 0.0;
    int n1 = 0;
    int n2 = 4;

    // discretization
    int nx = 64;
    int nz = 33;
    double dt = 1e-3;
    double t_end = 10.0;
    double cfl_limit = 0.5;

    // initial data and noise
    std::uint64_t seed = 1;
    double ic_amplitude = 0.0;

    // output cadence (simulation time units; 0 = every step / disabled)
    double trace_dt = 0.0;
    double snapshot_dt = 0.0;
    double checkpoint_dt = 0.0;

    // statistics
    double burn_in = 20.0;
    int batches = 8;

    // model selection: "finite" or "infinite"
    std::string model = "finite";

    // coupling
    std::string coupling_case = "case_ii"; // case_i | case_ii
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int n_nudge_u = 0;     // 0 with auto_modes -> derived from lambda
    int n_nudge_theta = 0; // 0 with auto_modes -> derived from lambda
    bool auto_modes = true;
    double budget = 1e6;
    double sync_eps = 1e-10;
    double fit_window = 0.5;
    double sync_fraction = 0.5;

    // ensembles
    int members = 1;
    int threads = 1;

    // martingale test
    double gamma = 0.25;
    std::vector<double> k_values = {2.0, 4.0, 8.0};

    // nusselt sweep (values of ra; empty = just 'ra')
    std::vector<double> sweep_ra;

    // prescribed advecting velocity amplitude for the comparison experiment
    double comparison_v_amplitude = 2.0;

    NondimParams nondim() const;
    std::vector<std::string> validate() const;
    // Canonical text form: every key, sorted, full precision. Hash input and
    // the format written by serialization.
    std::string canonical() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

} // namespace rbc
