// Experiment driver: run / resume / couple / nusselt-sweep / verify-comparison
// / martingale-test / report.  Exit codes: 0 success, 2 validation (every
// violated constraint listed), 3 numerical failure (latest checkpoint kept).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rbc/coupling.hpp"
#include "rbc/grid.hpp"
#include "rbc/infinite_pr.hpp"
#include "rbc/io.hpp"
#include "rbc/noise.hpp"
#include "rbc/operators.hpp"
#include "rbc/params.hpp"
#include "rbc/philox.hpp"
#include "rbc/solver.hpp"
#include "rbc/stats.hpp"
#include "rbc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rbc {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Options {
    std::string config;
    std::string output = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int members = 0;
    int threads = 0;
    std::uint64_t max_steps = 0;
};

ExperimentConfig effective_config(const Options& o) {
    ExperimentConfig cfg = load_config_file(o.config);
    if (o.seed_set) cfg.seed = o.seed;
    if (o.members > 0) cfg.members = o.members;
    if (o.threads > 0) cfg.threads = o.threads;
    return cfg;
}

int report_violations(const std::vector<std::string>& errors) {
    std::fprintf(stderr, "configuration invalid (%zu constraint%s violated):\n", errors.size(),
                 errors.size() == 1 ? "" : "s");
    for (const auto& e : errors) std::fprintf(stderr, "  - %s\n", e.c_str());
    return 2;
}

std::string member_suffix(int m, int members) {
    if (members == 1) return "";
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%03d", m);
    return buf;
}

// Index-ordered worker pool; the first failing member's exception wins.
void parallel_members(int members, int threads, const std::function<void(int)>& work) {
    threads = std::clamp(threads, 1, members);
    if (threads == 1) {
        for (int m = 0; m < members; ++m) work(m);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<size_t>(members));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int m = next.fetch_add(1);
                if (m >= members) return;
                try {
                    work(m);
                } catch (...) {
                    errors[static_cast<size_t>(m)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

Field initial_theta(const Grid& g, double amplitude, double scale = 1.0, double phase = 0.0) {
    Field f(g);
    const double kx = 2.0 * kPi / g.aspect;
    for (int i = 0; i < g.nx; ++i) {
        const double cx = std::cos(kx * g.x(i) + phase);
        for (int j = 1; j < g.nz - 1; ++j)
            f(i, j) = amplitude * scale * std::sin(kPi * g.z(j)) * cx;
    }
    return f;
}

std::uint64_t steps_for(const ExperimentConfig& cfg) {
    return static_cast<std::uint64_t>(std::llround(cfg.t_end / cfg.dt));
}

std::uint64_t cadence(double every_dt, double dt) {
    if (every_dt <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::max<long long>(1, std::llround(every_dt / dt)));
}

json seeding_doc(const ExperimentConfig& cfg) {
    return json{
        {"base_seed", cfg.seed},
        {"member_streams",
         "Philox4x32-10 keyed per member by a splitmix64 chain over (base_seed, member_index); "
         "counters advance as (step, channel, slot), so the stream position is implied by the "
         "step index and no generator state is stored"},
    };
}

void write_manifest(const std::string& dir, const std::string& command,
                    const ExperimentConfig& cfg, std::uint64_t hash, json extra = {}) {
    json m{
        {"version", kCodeVersion},
        {"config_hash", hex64(hash)},
        {"command", command},
        {"config", cfg.canonical()},
        {"seeding", seeding_doc(cfg)},
    };
    if (!extra.is_null()) m["bases"] = std::move(extra);
    write_json(dir + "/manifest.json", m);
}

const std::vector<std::string> kTraceColumns = {
    "t", "norm_u_sq", "norm_theta_sq", "grad_u_sq", "grad_theta_sq", "theta_l4", "flux_term"};

std::vector<double> trace_row(const EnergyDiagnostics& d) {
    return {d.t, d.norm_u_sq, d.norm_theta_sq, d.grad_u_sq, d.grad_theta_sq, d.theta_l4,
            d.flux_term};
}

json diag_json(const EnergyDiagnostics& d) {
    return json{{"t", d.t},
                {"norm_u_sq", d.norm_u_sq},
                {"norm_theta_sq", d.norm_theta_sq},
                {"grad_u_sq", d.grad_u_sq},
                {"grad_theta_sq", d.grad_theta_sq},
                {"theta_l4", d.theta_l4},
                {"flux_term", d.flux_term}};
}

struct RunPlan {
    ExperimentConfig cfg;
    std::uint64_t hash = 0;
    Grid grid;
    NondimParams nd;
    StepConfig step;
    std::unique_ptr<NoiseBasis> temp_basis;
    std::unique_ptr<NoiseBasis> vel_basis;
    std::uint64_t steps_total = 0;
    std::uint64_t trace_every = 1;
    std::uint64_t snap_every = 0;
    std::uint64_t ckpt_every = 0;
};

// Validates and assembles everything shared by the trajectory commands.
// Returns nonzero exit code on validation failure.
int make_plan(const Options& o, std::vector<std::string> extra_checks, RunPlan& plan) {
    ExperimentConfig cfg = effective_config(o);
    std::vector<std::string> errors = cfg.validate();
    if (cfg.model == "infinite" && cfg.n1 > 0)
        errors.push_back("infinite-Pr model has no velocity equation; set n1 = 0");
    errors.insert(errors.end(), extra_checks.begin(), extra_checks.end());
    if (!errors.empty()) return report_violations(errors);

    plan.cfg = cfg;
    plan.hash = config_hash(cfg);
    plan.grid = Grid(cfg.nx, cfg.nz, cfg.aspect);
    plan.nd = cfg.nondim();
    plan.step = StepConfig{cfg.dt, cfg.cfl_limit};
    if (cfg.n2 > 0)
        plan.temp_basis = std::make_unique<NoiseBasis>(build_temperature_basis(cfg.n2, plan.grid));
    if (cfg.model == "finite" && cfg.n1 > 0)
        plan.vel_basis = std::make_unique<NoiseBasis>(build_velocity_basis(cfg.n1, plan.grid));
    plan.steps_total = steps_for(cfg);
    plan.trace_every = cfg.trace_dt <= 0.0 ? 1 : cadence(cfg.trace_dt, cfg.dt);
    plan.snap_every = cadence(cfg.snapshot_dt, cfg.dt);
    plan.ckpt_every = cadence(cfg.checkpoint_dt, cfg.dt);
    return 0;
}

json bases_json(const RunPlan& plan) {
    json b;
    if (plan.temp_basis) b["temperature"] = json::parse(basis_manifest_json(*plan.temp_basis));
    if (plan.vel_basis) b["velocity"] = json::parse(basis_manifest_json(*plan.vel_basis));
    return b;
}

CheckpointData finite_checkpoint(const RunPlan& plan, const BoussinesqSolver& solver, int member) {
    const BoussinesqSolver::State s = solver.save_state();
    CheckpointData d;
    d.code_version = kCodeVersion;
    d.cfg_hash = plan.hash;
    d.model = 0;
    d.base_seed = plan.cfg.seed;
    d.trajectory_id = static_cast<std::uint64_t>(member);
    d.step = s.step;
    d.t = s.t;
    d.has_history = s.has_history;
    d.nx = plan.grid.nx;
    d.nz = plan.grid.nz;
    d.aspect = plan.grid.aspect;
    d.fields = {s.theta.v, s.omega.v, s.theta_prev.v, s.omega_prev.v};
    return d;
}

CheckpointData infinite_checkpoint(const RunPlan& plan, const InfinitePrSolver& solver,
                                   int member) {
    const InfinitePrSolver::State s = solver.save_state();
    CheckpointData d;
    d.code_version = kCodeVersion;
    d.cfg_hash = plan.hash;
    d.model = 1;
    d.base_seed = plan.cfg.seed;
    d.trajectory_id = static_cast<std::uint64_t>(member);
    d.step = s.step;
    d.t = s.t;
    d.has_history = s.has_history;
    d.nx = plan.grid.nx;
    d.nz = plan.grid.nz;
    d.aspect = plan.grid.aspect;
    d.fields = {s.theta.v, s.theta_prev.v};
    return d;
}

// Advances one member from its current step to the end (or --max-steps),
// emitting trace rows, snapshots, and checkpoints.  Shared by run and resume:
// resume passes emit_initial_row = false.
template <class Solver, class MakeCkpt>
EnergyDiagnostics drive_member(const RunPlan& plan, const Options& o, Solver& solver,
                               CsvWriter& trace, const std::string& dir, int member,
                               bool emit_initial_row, const MakeCkpt& make_ckpt) {
    const std::string suffix = member_suffix(member, plan.cfg.members);
    if (emit_initial_row) trace.row(trace_row(solver.diagnostics()));
    const std::string ckpt_path = dir + "/checkpoint" + suffix + ".bin";
    bool completed = false;
    while (solver.step_index() < plan.steps_total) {
        solver.step();
        const std::uint64_t n = solver.step_index();
        completed = n == plan.steps_total;
        if (n % plan.trace_every == 0 || completed) trace.row(trace_row(solver.diagnostics()));
        if (plan.snap_every != 0 && n % plan.snap_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "/snapshots/theta%s_%08llu.bfld", suffix.c_str(),
                          static_cast<unsigned long long>(n));
            write_snapshot(dir + name, plan.grid, solver.theta(), solver.time());
        }
        const bool stopping_early = o.max_steps != 0 && n >= o.max_steps && !completed;
        if ((plan.ckpt_every != 0 && n % plan.ckpt_every == 0) || stopping_early)
            write_checkpoint(ckpt_path, make_ckpt(solver, member));
        if (stopping_early) break;
    }
    trace.flush();
    if (completed) {
        write_snapshot(dir + "/final_theta" + suffix + ".bfld", plan.grid, solver.theta(),
                       solver.time());
        write_profile_csv(dir + "/theta_profile" + suffix + ".csv", plan.grid, solver.theta(),
                          plan.hash);
    }
    return solver.diagnostics();
}

int cmd_run(const Options& o) {
    RunPlan plan;
    if (int rc = make_plan(o, {}, plan); rc != 0) return rc;
    fs::create_directories(o.output);
    if (plan.snap_every != 0) fs::create_directories(o.output + "/snapshots");
    write_manifest(o.output, "run", plan.cfg, plan.hash, bases_json(plan));

    const int members = plan.cfg.members;
    std::vector<EnergyDiagnostics> final_diag(static_cast<size_t>(members));
    std::vector<bool> completed(static_cast<size_t>(members), false);
    parallel_members(members, plan.cfg.threads, [&](int m) {
        const std::string suffix = member_suffix(m, members);
        CsvWriter trace(o.output + "/trace" + suffix + ".csv", kTraceColumns, plan.hash);
        if (plan.cfg.model == "finite") {
            BoussinesqSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    plan.vel_basis.get(),
                                    WienerStream(plan.cfg.seed, static_cast<std::uint64_t>(m)));
            solver.set_theta(initial_theta(plan.grid, plan.cfg.ic_amplitude));
            final_diag[static_cast<size_t>(m)] =
                drive_member(plan, o, solver, trace, o.output, m, true,
                             [&](const BoussinesqSolver& s, int mm) {
                                 return finite_checkpoint(plan, s, mm);
                             });
            completed[static_cast<size_t>(m)] = solver.step_index() == plan.steps_total;
        } else {
            InfinitePrSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    WienerStream(plan.cfg.seed, static_cast<std::uint64_t>(m)));
            solver.set_theta(initial_theta(plan.grid, plan.cfg.ic_amplitude));
            final_diag[static_cast<size_t>(m)] =
                drive_member(plan, o, solver, trace, o.output, m, true,
                             [&](const InfinitePrSolver& s, int mm) {
                                 return infinite_checkpoint(plan, s, mm);
                             });
            completed[static_cast<size_t>(m)] = solver.step_index() == plan.steps_total;
        }
    });

    // A run cut short by --max-steps leaves its checkpoint as the summary.
    if (std::all_of(completed.begin(), completed.end(), [](bool b) { return b; })) {
        json members_json = json::array();
        for (int m = 0; m < members; ++m) members_json.push_back(diag_json(final_diag[static_cast<size_t>(m)]));
        write_json(o.output + "/summary.json",
                   json{{"version", kCodeVersion},
                        {"config_hash", hex64(plan.hash)},
                        {"kind", "run"},
                        {"model", plan.cfg.model},
                        {"members", members},
                        {"final", members_json}});
    }
    return 0;
}

int cmd_resume(const Options& o) {
    RunPlan plan;
    if (int rc = make_plan(o, {}, plan); rc != 0) return rc;
    const int members = plan.cfg.members;

    // Refuse before touching any output: every member checkpoint must match
    // this build and this config.
    std::vector<CheckpointData> ckpts;
    std::vector<std::string> errors;
    for (int m = 0; m < members; ++m) {
        const std::string path =
            o.output + "/checkpoint" + member_suffix(m, members) + ".bin";
        try {
            CheckpointData d = read_checkpoint(path);
            if (d.code_version != kCodeVersion)
                errors.push_back("checkpoint " + path + " written by version " + d.code_version +
                                 ", this build is " + kCodeVersion);
            if (d.cfg_hash != plan.hash)
                errors.push_back("checkpoint " + path + " has config hash " + hex64(d.cfg_hash) +
                                 " but the supplied config hashes to " + hex64(plan.hash) +
                                 " (parameters altered)");
            const std::uint8_t want = plan.cfg.model == "finite" ? 0 : 1;
            if (d.model != want)
                errors.push_back("checkpoint " + path + " stores the other model");
            if (d.nx != plan.grid.nx || d.nz != plan.grid.nz)
                errors.push_back("checkpoint " + path + " grid mismatch");
            ckpts.push_back(std::move(d));
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    }
    if (!errors.empty()) return report_violations(errors);

    std::vector<EnergyDiagnostics> final_diag(static_cast<size_t>(members));
    std::vector<bool> completed(static_cast<size_t>(members), false);
    parallel_members(members, plan.cfg.threads, [&](int m) {
        const CheckpointData& d = ckpts[static_cast<size_t>(m)];
        const std::string suffix = member_suffix(m, members);
        CsvWriter trace(o.output + "/trace" + suffix + ".csv", kTraceColumns, plan.hash,
                        /*append=*/true);
        if (plan.cfg.model == "finite") {
            BoussinesqSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    plan.vel_basis.get(),
                                    WienerStream(d.base_seed, d.trajectory_id));
            BoussinesqSolver::State s{d.t, d.step, Field(plan.grid), Field(plan.grid),
                                      Field(plan.grid), Field(plan.grid), d.has_history};
            s.theta.v = d.fields.at(0);
            s.omega.v = d.fields.at(1);
            s.theta_prev.v = d.fields.at(2);
            s.omega_prev.v = d.fields.at(3);
            solver.restore_state(s);
            final_diag[static_cast<size_t>(m)] =
                drive_member(plan, o, solver, trace, o.output, m, false,
                             [&](const BoussinesqSolver& sv, int mm) {
                                 return finite_checkpoint(plan, sv, mm);
                             });
            completed[static_cast<size_t>(m)] = solver.step_index() == plan.steps_total;
        } else {
            InfinitePrSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    WienerStream(d.base_seed, d.trajectory_id));
            InfinitePrSolver::State s{d.t, d.step, Field(plan.grid), Field(plan.grid),
                                      d.has_history};
            s.theta.v = d.fields.at(0);
            s.theta_prev.v = d.fields.at(1);
            solver.restore_state(s);
            final_diag[static_cast<size_t>(m)] =
                drive_member(plan, o, solver, trace, o.output, m, false,
                             [&](const InfinitePrSolver& sv, int mm) {
                                 return infinite_checkpoint(plan, sv, mm);
                             });
            completed[static_cast<size_t>(m)] = solver.step_index() == plan.steps_total;
        }
    });

    if (std::all_of(completed.begin(), completed.end(), [](bool b) { return b; })) {
        json members_json = json::array();
        for (int m = 0; m < members; ++m) members_json.push_back(diag_json(final_diag[static_cast<size_t>(m)]));
        write_json(o.output + "/summary.json",
                   json{{"version", kCodeVersion},
                        {"config_hash", hex64(plan.hash)},
                        {"kind", "run"},
                        {"model", plan.cfg.model},
                        {"members", members},
                        {"final", members_json}});
    }
    return 0;
}

int cmd_couple(const Options& o) {
    RunPlan plan;
    {
        // Pre-flight the coupling block so its violations are listed with the
        // config's own, not thrown from a constructor one at a time.
        ExperimentConfig probe = effective_config(o);
        std::vector<std::string> extra;
        if (probe.n2 <= 0) extra.push_back("coupling requires temperature forcing (n2 > 0)");
        if (probe.model == "infinite" && probe.lambda1 != 0.0)
            extra.push_back("infinite-Pr coupling has no velocity equation; lambda1 must be 0");
        if (int rc = make_plan(o, extra, plan); rc != 0) return rc;
    }

    CouplingConfig cc;
    cc.mode = plan.cfg.coupling_case == "case_i" ? CouplingConfig::Mode::case_i
                                                 : CouplingConfig::Mode::case_ii;
    cc.lambda1 = plan.cfg.lambda1;
    cc.lambda2 = plan.cfg.lambda2;
    cc.r_budget = plan.cfg.budget;
    if (plan.cfg.auto_modes) {
        cc.n2_nudge = plan.cfg.lambda2 > 0.0
                          ? auto_mode_count(BasisKind::temperature, plan.cfg.lambda2, plan.grid)
                          : 0;
        cc.n1_nudge = plan.cfg.lambda1 > 0.0
                          ? auto_mode_count(BasisKind::velocity, plan.cfg.lambda1, plan.grid)
                          : 0;
    } else {
        cc.n2_nudge = plan.cfg.n_nudge_theta;
        cc.n1_nudge = plan.cfg.n_nudge_u;
    }
    try {
        cc.validate(plan.cfg.n1, plan.cfg.n2, plan.nd.pr, plan.cfg.dt);
    } catch (const std::invalid_argument& e) {
        return report_violations({e.what()});
    }

    fs::create_directories(o.output);
    write_manifest(o.output, "couple", plan.cfg, plan.hash, bases_json(plan));

    const int members = plan.cfg.members;
    struct MemberResult {
        DecayEstimate est;
        bool stopped_ever = false;
        double final_diff = 0.0;
        double cost = 0.0;
        double log_density = 0.0;
        bool noise_match = false;
    };
    std::vector<MemberResult> results(static_cast<size_t>(members));
    const std::vector<std::string> cols = {"t",    "diff_u_sq",   "diff_theta_sq",
                                           "girsanov_cost", "log_density", "stopped"};
    parallel_members(members, plan.cfg.threads, [&](int m) {
        WienerStream stream(plan.cfg.seed, static_cast<std::uint64_t>(m));
        CsvWriter csv(o.output + "/coupling" + member_suffix(m, members) + ".csv", cols,
                      plan.hash);
        std::vector<double> ts, diffs;
        ts.reserve(plan.steps_total + 1);
        diffs.reserve(plan.steps_total + 1);
        MemberResult res;
        auto consume = [&](std::uint64_t n, const CouplingTraceRow& row) {
            ts.push_back(row.t);
            diffs.push_back(row.diff_u_sq + row.diff_theta_sq);
            if (n % plan.trace_every == 0 || n == plan.steps_total)
                csv.row({row.t, row.diff_u_sq, row.diff_theta_sq, row.girsanov_cost,
                         row.log_density, row.stopped ? 1.0 : 0.0});
        };
        const Field theta0 = initial_theta(plan.grid, plan.cfg.ic_amplitude);
        const Field zero(plan.grid);
        if (plan.cfg.model == "finite") {
            CoupledPair pair(plan.grid, plan.nd, plan.step, *plan.temp_basis,
                             plan.vel_basis.get(), cc, stream);
            pair.set_primary(theta0, zero);
            pair.set_nudged(zero, zero);
            for (std::uint64_t n = 1; n <= plan.steps_total; ++n) consume(n, pair.step());
            res.stopped_ever = pair.ledger().stopped();
            res.cost = pair.ledger().cost();
            res.log_density = pair.ledger().log_density();
            res.noise_match = pair.primary_noise_checksum() == pair.nudged_noise_checksum();
        } else {
            InfPrCoupledPair pair(plan.grid, plan.nd, plan.step, *plan.temp_basis, cc, stream);
            pair.set_primary(theta0);
            pair.set_nudged(zero);
            for (std::uint64_t n = 1; n <= plan.steps_total; ++n) consume(n, pair.step());
            res.stopped_ever = pair.ledger().stopped();
            res.cost = pair.ledger().cost();
            res.log_density = pair.ledger().log_density();
            res.noise_match = pair.primary_noise_checksum() == pair.nudged_noise_checksum();
        }
        res.final_diff = diffs.back();
        res.est = estimate_decay(ts, diffs, plan.cfg.fit_window, plan.cfg.sync_eps);
        results[static_cast<size_t>(m)] = res;
    });

    int synced = 0;
    bool budget_ok = true;
    bool noise_ok = true;
    json members_json = json::array();
    for (int m = 0; m < members; ++m) {
        const MemberResult& r = results[static_cast<size_t>(m)];
        if (r.est.synced) {
            ++synced;
            if (r.stopped_ever) budget_ok = false;
        }
        noise_ok = noise_ok && r.noise_match;
        members_json.push_back(json{{"member", m},
                                    {"synced", r.est.synced},
                                    {"rate", r.est.rate},
                                    {"r_squared", r.est.r_squared},
                                    {"rate_defined", r.est.rate_defined},
                                    {"stopped_ever", r.stopped_ever},
                                    {"final_diff", r.final_diff},
                                    {"girsanov_cost", r.cost},
                                    {"log_density", r.log_density},
                                    {"noise_checksums_equal", r.noise_match}});
    }
    const double fraction = members > 0 ? static_cast<double>(synced) / members : 0.0;
    write_json(o.output + "/summary.json",
               json{{"version", kCodeVersion},
                    {"config_hash", hex64(plan.hash)},
                    {"kind", "couple"},
                    {"model", plan.cfg.model},
                    {"coupling_case", plan.cfg.coupling_case},
                    {"lambda1", cc.lambda1},
                    {"lambda2", cc.lambda2},
                    {"n_nudge_u", cc.n1_nudge},
                    {"n_nudge_theta", cc.n2_nudge},
                    {"budget", cc.r_budget},
                    {"members", members},
                    {"synced_count", synced},
                    {"synced_fraction", fraction},
                    {"target_fraction", plan.cfg.sync_fraction},
                    {"target_met", fraction >= plan.cfg.sync_fraction},
                    {"budget_ok_on_synced", budget_ok},
                    {"noise_checksums_equal", noise_ok},
                    {"member_results", members_json}});
    return 0;
}

int cmd_nusselt(const Options& o) {
    RunPlan plan;
    {
        ExperimentConfig probe = effective_config(o);
        std::vector<std::string> extra;
        if (probe.batches < 8) extra.push_back("nusselt averaging needs at least 8 batches");
        if (!(probe.burn_in < probe.t_end))
            extra.push_back("burn_in must be smaller than t_end");
        if (int rc = make_plan(o, extra, plan); rc != 0) return rc;
    }
    fs::create_directories(o.output);
    write_manifest(o.output, "nusselt-sweep", plan.cfg, plan.hash, bases_json(plan));

    std::vector<double> points = plan.cfg.sweep_ra;
    if (points.empty()) points.push_back(plan.cfg.ra);

    const std::vector<std::string> cols = {"ra",        "ra_tilde",  "product",  "nu_flux",
                                           "hw_flux",   "nu_grad_t", "hw_grad_t", "nu_grad_u",
                                           "hw_grad_u", "bound",     "window",   "batches"};
    CsvWriter csv(o.output + "/sweep.csv", cols, plan.hash);
    json points_json = json::array();
    std::vector<double> log_prod, log_bound;
    for (size_t p = 0; p < points.size(); ++p) {
        ExperimentConfig pc = plan.cfg;
        pc.ra = points[p];
        std::vector<std::string> errs = pc.validate();
        if (!errs.empty()) return report_violations(errs);
        const NondimParams nd = pc.nondim();

        TimeAverager avg(pc.burn_in, {"flux_term", "grad_theta_sq", "grad_u_sq"});
        avg.set_horizon(pc.t_end, pc.batches);
        const std::uint64_t steps = steps_for(pc);
        auto sample = [&](EnergyDiagnostics d) {
            avg.add_sample(d.t, {d.flux_term, d.grad_theta_sq, d.grad_u_sq});
        };
        if (pc.model == "finite") {
            BoussinesqSolver solver(plan.grid, nd, plan.step, plan.temp_basis.get(),
                                    plan.vel_basis.get(),
                                    WienerStream(pc.seed, static_cast<std::uint64_t>(p)));
            solver.set_theta(initial_theta(plan.grid, pc.ic_amplitude));
            sample(solver.diagnostics());
            for (std::uint64_t n = 1; n <= steps; ++n) {
                solver.step();
                sample(solver.diagnostics());
            }
        } else {
            InfinitePrSolver solver(plan.grid, nd, plan.step, plan.temp_basis.get(),
                                    WienerStream(pc.seed, static_cast<std::uint64_t>(p)));
            solver.set_theta(initial_theta(plan.grid, pc.ic_amplitude));
            sample(solver.diagnostics());
            for (std::uint64_t n = 1; n <= steps; ++n) {
                solver.step();
                sample(solver.diagnostics());
            }
        }
        const NusseltEstimates est = nusselt_estimates(avg, nd);
        const double bound = background_bound(nd, build_background_profile(nd.ra, nd.ra_tilde));
        const double product = nd.ra * nd.ra_tilde;
        csv.row({nd.ra, nd.ra_tilde, product, est.nu_flux, est.hw_flux, est.nu_grad_t,
                 est.hw_grad_t, est.nu_grad_u, est.hw_grad_u, bound, est.window,
                 static_cast<double>(est.batches)});
        points_json.push_back(json{{"ra", nd.ra},
                                   {"ra_tilde", nd.ra_tilde},
                                   {"product", product},
                                   {"nu_flux", est.nu_flux},
                                   {"hw_flux", est.hw_flux},
                                   {"nu_grad_t", est.nu_grad_t},
                                   {"hw_grad_t", est.hw_grad_t},
                                   {"nu_grad_u", est.nu_grad_u},
                                   {"hw_grad_u", est.hw_grad_u},
                                   {"bound", bound},
                                   {"flux_below_bound", est.nu_flux <= bound},
                                   {"window", est.window},
                                   {"batches", est.batches}});
        log_prod.push_back(std::log(product));
        log_bound.push_back(std::log(bound));
    }

    json summary{{"version", kCodeVersion},
                 {"config_hash", hex64(plan.hash)},
                 {"kind", "nusselt-sweep"},
                 {"model", plan.cfg.model},
                 {"points", points_json}};
    if (points.size() >= 2) {
        // Least-squares slope of log(bound) against log(Ra Ra~).
        const double n = static_cast<double>(log_prod.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < log_prod.size(); ++i) {
            sx += log_prod[i];
            sy += log_bound[i];
            sxx += log_prod[i] * log_prod[i];
            sxy += log_prod[i] * log_bound[i];
        }
        summary["bound_growth_exponent"] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    write_json(o.output + "/summary.json", summary);
    return 0;
}

int cmd_comparison(const Options& o) {
    RunPlan plan;
    {
        ExperimentConfig probe = effective_config(o);
        std::vector<std::string> extra;
        if (probe.n2 <= 0)
            extra.push_back("the comparison experiment is noise-driven; set n2 > 0");
        if (int rc = make_plan(o, extra, plan); rc != 0) return rc;
    }
    fs::create_directories(o.output);
    write_manifest(o.output, "verify-comparison", plan.cfg, plan.hash, bases_json(plan));

    const int members = plan.cfg.members;
    const Grid& g = plan.grid;
    std::vector<double> member_min(static_cast<size_t>(members));
    parallel_members(members, plan.cfg.threads, [&](int m) {
        // A frozen smooth advecting field from a small streamfunction library:
        // low x wavenumber, clamped z profile, member-dependent amplitude and
        // phase.  Velocity comes from the discrete curl so it matches the
        // solver's operators.
        Spectral sp(g);
        Field psi(g);
        const int mode = 1 + m % 3;
        const double phase = 2.0 * kPi * std::fmod(0.381966011250105 * (m + 1), 1.0);
        const double amp =
            plan.cfg.comparison_v_amplitude * (0.4 + 0.6 * ((m % 5) + 1) / 5.0);
        const double kx = 2.0 * kPi * mode / g.aspect;
        for (int i = 0; i < g.nx; ++i) {
            const double sx = std::sin(kx * g.x(i) + phase);
            for (int j = 0; j < g.nz; ++j) {
                const double z = g.z(j);
                psi(i, j) = amp * sx * 16.0 * z * z * (1.0 - z) * (1.0 - z);
            }
        }
        Field u1(g), u2(g);
        velocity_from_streamfunction(g, sp, psi, u1, u2);

        const double scale = 0.3 + 0.7 * (m + 1) / static_cast<double>(members);
        const double sign = m % 2 == 0 ? 1.0 : -1.0;
        const Field xi0 = initial_theta(g, plan.cfg.ic_amplitude, sign * scale,
                                        0.5 * kPi * (m % 4));
        ComparisonPair pair(g, plan.nd.ra_tilde, plan.step, plan.temp_basis.get(),
                            WienerStream(plan.cfg.seed, static_cast<std::uint64_t>(m)), u1, u2,
                            xi0);
        CsvWriter csv(o.output + "/comparison" + member_suffix(m, members) + ".csv",
                      {"t", "margin"}, plan.hash);
        double running_min = pair.pointwise_margin();
        csv.row({pair.time(), running_min});
        for (std::uint64_t n = 1; n <= plan.steps_total; ++n) {
            pair.step();
            const double margin = pair.pointwise_margin();
            running_min = std::min(running_min, margin);
            if (n % plan.trace_every == 0 || n == plan.steps_total)
                csv.row({pair.time(), margin});
        }
        member_min[static_cast<size_t>(m)] = running_min;
    });

    double overall = member_min.empty() ? 0.0 : member_min[0];
    json mins = json::array();
    for (double v : member_min) {
        overall = std::min(overall, v);
        mins.push_back(v);
    }
    const double threshold = -1e-6 * plan.nd.ra_tilde;
    write_json(o.output + "/summary.json",
               json{{"version", kCodeVersion},
                    {"config_hash", hex64(plan.hash)},
                    {"kind", "verify-comparison"},
                    {"members", members},
                    {"ra_tilde", plan.nd.ra_tilde},
                    {"min_margin", overall},
                    {"member_min_margins", mins},
                    {"threshold", threshold},
                    {"pass", overall >= threshold}});
    std::printf("min comparison margin over %d members: %s (threshold %s)\n", members,
                format_double(overall).c_str(), format_double(threshold).c_str());
    return 0;
}

int cmd_martingale(const Options& o) {
    RunPlan plan;
    {
        ExperimentConfig probe = effective_config(o);
        std::vector<std::string> extra;
        if (probe.n2 <= 0) extra.push_back("the martingale test is noise-driven; set n2 > 0");
        if (probe.members < 100)
            extra.push_back("the martingale test needs at least 100 members (underpowered)");
        if (probe.k_values.empty()) extra.push_back("k_values must not be empty");
        if (probe.gamma < 0.0) extra.push_back("gamma must be nonnegative");
        if (int rc = make_plan(o, extra, plan); rc != 0) return rc;
    }
    fs::create_directories(o.output);
    write_manifest(o.output, "martingale-test", plan.cfg, plan.hash, bases_json(plan));

    const int members = plan.cfg.members;
    const NoiseBasis& basis = *plan.temp_basis;
    std::vector<MartingaleTrace> traces(static_cast<size_t>(members));
    parallel_members(members, plan.cfg.threads, [&](int m) {
        MartingaleTrace tr;
        tr.m.reserve(plan.steps_total + 1);
        tr.quadratic_variation.reserve(plan.steps_total + 1);
        tr.m.push_back(0.0);
        tr.quadratic_variation.push_back(0.0);
        double mart = 0.0, qv = 0.0;
        const double sqdt = std::sqrt(plan.cfg.dt);
        std::vector<double> gaussians;
        auto accumulate = [&](const std::vector<double>& coeffs) {
            // coeffs are <shape_k, theta> before the step; gaussians are the
            // draws that step consumed.
            for (size_t k = 0; k < coeffs.size(); ++k) {
                const double ac = basis.modes[k].amplitude * coeffs[k];
                mart += 2.0 * ac * sqdt * gaussians[k];
                qv += 4.0 * ac * ac * plan.cfg.dt;
            }
            tr.m.push_back(mart);
            tr.quadratic_variation.push_back(qv);
        };
        if (plan.cfg.model == "finite") {
            BoussinesqSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    plan.vel_basis.get(),
                                    WienerStream(plan.cfg.seed, static_cast<std::uint64_t>(m)));
            solver.set_theta(initial_theta(plan.grid, plan.cfg.ic_amplitude));
            for (std::uint64_t n = 1; n <= plan.steps_total; ++n) {
                const std::vector<double> coeffs =
                    modal_coefficients(basis, plan.grid, solver.theta(), basis.size());
                solver.step_with_drift(nullptr, nullptr, &gaussians, nullptr);
                accumulate(coeffs);
            }
        } else {
            InfinitePrSolver solver(plan.grid, plan.nd, plan.step, plan.temp_basis.get(),
                                    WienerStream(plan.cfg.seed, static_cast<std::uint64_t>(m)));
            solver.set_theta(initial_theta(plan.grid, plan.cfg.ic_amplitude));
            for (std::uint64_t n = 1; n <= plan.steps_total; ++n) {
                const std::vector<double> coeffs =
                    modal_coefficients(basis, plan.grid, solver.theta(), basis.size());
                solver.step_with_drift(nullptr, &gaussians);
                accumulate(coeffs);
            }
        }
        traces[static_cast<size_t>(m)] = std::move(tr);
    });

    const std::vector<ExceedanceRow> rows =
        martingale_exceedance_test(traces, plan.cfg.gamma, plan.cfg.k_values);
    CsvWriter csv(o.output + "/martingale.csv",
                  {"k", "frequency", "bound", "binomial_sigma", "exceedances", "traces"},
                  plan.hash);
    json table = json::array();
    bool all_below = true;
    for (const ExceedanceRow& r : rows) {
        csv.row({r.k, r.frequency, r.bound, r.binomial_sigma,
                 static_cast<double>(r.exceedances), static_cast<double>(r.traces)});
        const bool ok = r.frequency <= r.bound + 3.0 * r.binomial_sigma;
        all_below = all_below && ok;
        table.push_back(json{{"k", r.k},
                             {"frequency", r.frequency},
                             {"bound", r.bound},
                             {"binomial_sigma", r.binomial_sigma},
                             {"exceedances", r.exceedances},
                             {"traces", r.traces},
                             {"below_bound", ok}});
    }
    write_json(o.output + "/summary.json",
               json{{"version", kCodeVersion},
                    {"config_hash", hex64(plan.hash)},
                    {"kind", "martingale-test"},
                    {"model", plan.cfg.model},
                    {"gamma", plan.cfg.gamma},
                    {"members", members},
                    {"table", table},
                    {"all_below_bound", all_below}});
    return 0;
}

int cmd_report(const Options& o) {
    json summary;
    try {
        summary = read_json(o.output + "/summary.json");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report: %s\n", e.what());
        return 2;
    }
    if (!o.config.empty()) {
        const ExperimentConfig cfg = effective_config(o);
        const std::string want = hex64(config_hash(cfg));
        const std::string got = summary.value("config_hash", "");
        if (got != want) {
            std::fprintf(stderr,
                         "report: summary was produced under config hash %s, supplied config "
                         "hashes to %s\n",
                         got.c_str(), want.c_str());
            return 2;
        }
    }
    std::printf("kind:        %s\n", summary.value("kind", "?").c_str());
    std::printf("version:     %s\n", summary.value("version", "?").c_str());
    std::printf("config_hash: %s\n", summary.value("config_hash", "?").c_str());
    const std::string kind = summary.value("kind", "");
    if (kind == "couple") {
        std::printf("synced %d/%d members (target fraction %s, met: %s)\n",
                    summary.value("synced_count", 0), summary.value("members", 0),
                    format_double(summary.value("target_fraction", 0.0)).c_str(),
                    summary.value("target_met", false) ? "yes" : "no");
        std::printf("budget respected on synced members: %s\n",
                    summary.value("budget_ok_on_synced", false) ? "yes" : "no");
    } else if (kind == "nusselt-sweep") {
        for (const auto& p : summary["points"])
            std::printf("Ra=%-12s Nu_flux=%-10.6g Nu_grad_t=%-10.6g Nu_grad_u=%-10.6g bound=%-10.6g\n",
                        format_double(p.value("ra", 0.0)).c_str(), p.value("nu_flux", 0.0),
                        p.value("nu_grad_t", 0.0), p.value("nu_grad_u", 0.0),
                        p.value("bound", 0.0));
        if (summary.contains("bound_growth_exponent"))
            std::printf("bound growth exponent: %.4f\n",
                        summary.value("bound_growth_exponent", 0.0));
    } else if (kind == "verify-comparison") {
        std::printf("min margin %s against threshold %s: %s\n",
                    format_double(summary.value("min_margin", 0.0)).c_str(),
                    format_double(summary.value("threshold", 0.0)).c_str(),
                    summary.value("pass", false) ? "pass" : "fail");
    } else if (kind == "martingale-test") {
        for (const auto& r : summary["table"])
            std::printf("K=%-6s freq=%-10.6g bound=%-10.6g sigma=%-10.6g %s\n",
                        format_double(r.value("k", 0.0)).c_str(), r.value("frequency", 0.0),
                        r.value("bound", 0.0), r.value("binomial_sigma", 0.0),
                        r.value("below_bound", false) ? "ok" : "exceeded");
    } else if (kind == "run") {
        std::printf("members: %d (model %s)\n", summary.value("members", 0),
                    summary.value("model", "?").c_str());
    }
    return 0;
}

int dispatch(const std::string& command, const Options& o) {
    if (command == "run") return cmd_run(o);
    if (command == "resume") return cmd_resume(o);
    if (command == "couple") return cmd_couple(o);
    if (command == "nusselt-sweep") return cmd_nusselt(o);
    if (command == "verify-comparison") return cmd_comparison(o);
    if (command == "martingale-test") return cmd_martingale(o);
    if (command == "report") return cmd_report(o);
    std::fprintf(stderr, "unknown command %s\n", command.c_str());
    return 2;
}

} // namespace
} // namespace rbc

int main(int argc, char** argv) {
    CLI::App app{"stochastic Rayleigh-Benard convection experiments"};
    app.require_subcommand(1);

    rbc::Options opts;
    std::vector<CLI::App*> subs;
    for (const char* name : {"run", "resume", "couple", "nusselt-sweep", "verify-comparison",
                             "martingale-test", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        const bool is_report = std::string(name) == "report";
        auto* cfg = sub->add_option("--config", opts.config, "experiment config file");
        if (!is_report) cfg->required();
        sub->add_option("--output", opts.output, "output directory");
        sub->add_option("--seed", opts.seed, "override the config seed")
            ->each([&](const std::string&) { opts.seed_set = true; });
        sub->add_option("--members", opts.members, "override the ensemble size");
        sub->add_option("--threads", opts.threads, "override the worker count");
        if (std::string(name) == "run" || std::string(name) == "resume")
            sub->add_option("--max-steps", opts.max_steps,
                            "stop after this many steps, writing a checkpoint (0 = run to t_end)");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    std::string command;
    for (CLI::App* sub : subs)
        if (sub->parsed()) command = sub->get_name();

    try {
        return rbc::dispatch(command, opts);
    } catch (const rbc::CflError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const rbc::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration invalid:\n  - %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
