// Command-line front end: simulate synthetic sequences, run odometry or
// full SLAM on a scan container, and evaluate trajectories against ground
// truth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gcslam/gcslam.hpp"

namespace fs = std::filesystem;
using namespace gcslam;

namespace {

PipelineConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (seed) cfg.apply_seed(*seed);
    return cfg;
}

std::vector<Pose> load_priors(const std::string& prior_path) {
    if (prior_path.empty()) return {};
    return relative_priors_from_trajectory(read_tum_file(prior_path));
}

int cmd_simulate(const std::string& scenario_name, const PipelineConfig& cfg,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    const Scenario scenario = generate_scenario(scenario_name, cfg.scenario);
    const auto seq = simulate_sequence(scenario, cfg.sensor, cfg.prior_noise,
                                       detail::mix_seed(cfg.seed, 0x70726972ull), -1,
                                       cfg.scenario.scan_period);
    write_scan_container(out_dir + "/scans.bin", seq.scans);
    write_tum_file(out_dir + "/groundtruth.tum", seq.ground_truth);
    write_tum_file(out_dir + "/prior.tum", seq.prior);
    std::cout << "wrote " << seq.scans.size() << " scans to " << out_dir << "/scans.bin\n";
    return 0;
}

int cmd_odometry(const std::string& scans_path, const std::string& prior_path,
                 const std::string& mode_name, const PipelineConfig& cfg,
                 const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto scans = read_scan_container(scans_path, cfg.sensor.range_noise_sigma,
                                           cfg.sensor.cov_iso_floor);
    const MaintenanceMode mode = mode_name == "range" ? MaintenanceMode::RangeBased
                                                      : MaintenanceMode::ObservationBased;
    const auto result = run_odometry(scans, load_priors(prior_path), cfg, mode);
    write_tum_file(out_dir + "/trajectory.tum", result.trajectory);
    std::ofstream stats(out_dir + "/stats.csv");
    write_stats_csv(stats, result.stats);
    std::cout << "odometry over " << scans.size() << " scans, final map "
              << result.final_map.size() << " points\n";
    return 0;
}

int cmd_slam(const std::string& scans_path, const std::string& prior_path, bool no_ground,
             bool no_loop, const PipelineConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto scans = read_scan_container(scans_path, cfg.sensor.range_noise_sigma,
                                           cfg.sensor.cov_iso_floor);
    SlamToggles toggles;
    toggles.ground_constraints = !no_ground;
    toggles.loop_closure = !no_loop;
    const auto result = run_slam(scans, load_priors(prior_path), cfg, toggles);
    write_tum_file(out_dir + "/trajectory.tum", result.trajectory);
    write_graph_file(out_dir + "/graph.txt", result.graph);
    write_map_ply_file(out_dir + "/map.ply", result.final_map);
    std::ofstream stats(out_dir + "/stats.csv");
    write_stats_csv(stats, result.stats);
    std::cout << "slam over " << scans.size() << " scans: " << result.keyframes.size()
              << " key-frames, " << result.graph.planes().size() << " plane landmarks, "
              << result.loop_factor_count << " loop factors\n";
    return 0;
}

int cmd_evaluate(const std::string& est_path, const std::string& gt_path, bool align,
                 const std::string& report_path) {
    const auto report = evaluate_ate(read_tum_file(est_path), read_tum_file(gt_path), align);
    if (report_path.empty()) {
        write_ate_report(std::cout, report);
    } else {
        std::ofstream out(report_path);
        if (!out) throw IoError("cannot write report: " + report_path);
        write_ate_report(out, report);
        write_ate_report(std::cout, report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ground-constrained LiDAR SLAM toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", scenario = "corridor";
    std::string scans_path, prior_path, mode = "observation";
    std::string est_path, gt_path, report_path;
    std::optional<std::uint64_t> seed;
    bool no_ground = false, no_loop = false, align = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "plain-text config file (key = value)");
        sub->add_option("--seed", seed, "master RNG seed");
    };

    auto* sim = app.add_subcommand("simulate", "generate a synthetic scenario");
    add_common(sim);
    sim->add_option("--scenario", scenario,
                    "corridor | square_loop | bowl_road | two_floor_garage | ramp_junction");
    sim->add_option("--out-dir", out_dir, "output directory");

    auto* odo = app.add_subcommand("odometry", "LiDAR odometry over a scan container");
    add_common(odo);
    odo->add_option("--scans", scans_path, "scan container")->required();
    odo->add_option("--prior", prior_path, "prior trajectory (TUM)");
    odo->add_option("--mode", mode, "range | observation");
    odo->add_option("--out-dir", out_dir, "output directory");

    auto* slam = app.add_subcommand("slam", "full pipeline with graph optimization");
    add_common(slam);
    slam->add_option("--scans", scans_path, "scan container")->required();
    slam->add_option("--prior", prior_path, "prior trajectory (TUM)");
    slam->add_flag("--no-ground", no_ground, "disable ground-plane constraints");
    slam->add_flag("--no-loop", no_loop, "disable loop-closure detection");
    slam->add_option("--out-dir", out_dir, "output directory");

    auto* eval = app.add_subcommand("evaluate", "ATE between two TUM trajectories");
    eval->add_option("--est", est_path, "estimated trajectory")->required();
    eval->add_option("--gt", gt_path, "ground-truth trajectory")->required();
    eval->add_flag("--align", align, "rigid alignment before the error computation");
    eval->add_option("--report", report_path, "write the metrics report here too");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(scenario, load_config(config_path, seed), out_dir);
        if (odo->parsed())
            return cmd_odometry(scans_path, prior_path, mode, load_config(config_path, seed),
                                out_dir);
        if (slam->parsed())
            return cmd_slam(scans_path, prior_path, no_ground, no_loop,
                            load_config(config_path, seed), out_dir);
        if (eval->parsed()) return cmd_evaluate(est_path, gt_path, align, report_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
