// Command-line front end: dataset generation, training, evaluation, attack
// sweeps, stability reports, and trajectory simulation for the planted
// attractor classifier. Every randomized subcommand takes an explicit
// --seed, and equal seeds reproduce outputs byte for byte.

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "cvfr/cvfr.hpp"

namespace {

using namespace cvfr;

// Sub-seeds carved out of the one user-facing --seed.
constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagTrainData = 2;
constexpr std::uint64_t kTagTestData = 3;
constexpr std::uint64_t kTagTrainLoop = 4;

struct DataSource {
    std::string csv;
    std::string images;
    std::string labels;
    std::size_t subset = 0;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--dataset", csv, "dataset CSV (label,px_1..px_N)");
        cmd->add_option("--images", images, "IDX image file");
        cmd->add_option("--labels", labels, "IDX label file");
        cmd->add_option("--subset", subset, "keep only the first N items");
    }

    LabeledDataset load() const {
        LabeledDataset ds;
        if (!csv.empty()) {
            ds = load_dataset_csv(csv);
        } else if (!images.empty() && !labels.empty()) {
            ds = load_mnist_idx(images, labels);
        } else {
            throw Error("no dataset given: pass --dataset CSV or --images/--labels IDX paths");
        }
        if (subset > 0) ds = head_subset(ds, subset);
        return ds;
    }
};

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::strtod(tok.c_str(), nullptr));
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::strtoull(tok.c_str(), nullptr, 10));
    }
    return out;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataOptions {
    std::string dataset;
    std::string out;
    std::string templates;
    std::string images, labels;
    std::uint64_t seed = 0;
    int n_per_class = 1000;
    double corruption = 0.2;
};

int cmd_gen_data(const GenDataOptions& opt) {
    if (opt.dataset == "letters") {
        const std::string tpl = opt.templates.empty() ? "data/letters_7x7.txt" : opt.templates;
        const PatternGrids grids = read_pattern_grids(tpl);
        const LabeledDataset ds = gen_letters(grids.patterns, opt.n_per_class, opt.corruption, opt.seed);
        save_dataset_csv(opt.out, ds);
        std::printf("wrote %zu items (%d classes, %dx%d) to %s\n", ds.size(), static_cast<int>(grids.patterns.size()),
                    grids.rows, grids.cols, opt.out.c_str());
        return 0;
    }
    if (opt.dataset == "mnist") {
        if (opt.images.empty() || opt.labels.empty())
            throw Error("gen-data --dataset mnist needs --images and --labels IDX paths");
        const auto image_bytes = detail::read_file_bytes(opt.images);
        const auto label_bytes = detail::read_file_bytes(opt.labels);
        const IdxImageInfo info = idx_image_info(image_bytes, opt.images);
        const std::uint32_t n_labels = idx_label_count(label_bytes, opt.labels);
        if (info.count != n_labels)
            throw CountMismatchError(opt.images + " has " + std::to_string(info.count) + " images but " +
                                     opt.labels + " has " + std::to_string(n_labels) + " labels");
        std::ofstream manifest(opt.out);
        if (!manifest) throw Error("cannot write manifest: " + opt.out);
        manifest << "images " << opt.images << "\n"
                 << "labels " << opt.labels << "\n"
                 << "count " << info.count << "\n"
                 << "rows " << info.rows << "\n"
                 << "cols " << info.cols << "\n";
        std::printf("validated %u items of %ux%u; manifest at %s\n", info.count, info.rows, info.cols,
                    opt.out.c_str());
        return 0;
    }
    throw Error("unknown dataset: " + opt.dataset + " (expected letters|mnist)");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string dataset;
    std::string out;
    std::string log_path;
    std::string templates;
    std::string train_images, train_labels, test_images, test_labels;
    std::size_t train_subset = 0, test_subset = 0;
    std::uint64_t seed = 0;
    double sigma = 0.0;
    double dt = 0.1;
    int steps = 50; // T = 5: long unrolls train noticeably worse
    double lr = 1e-3;
    int epochs = -1; // default depends on the dataset
    int batch = 32;
    double grad_clip = 10.0;
    int train_per_class = 1000;
    int test_per_class = 200;
    double corruption = 0.2;
    double blambda = 4.0; // beta * lambda
    double hill_c = 1.0;
    int eval_realizations = 1;
    bool detach_damping = false;
};

int cmd_train(const TrainOptions& opt) {
    std::string tpl = opt.templates;
    LabeledDataset train_set, test_set;
    int default_epochs = 200;
    if (opt.dataset == "letters") {
        if (tpl.empty()) tpl = "data/letters_7x7.txt";
        const PatternGrids grids = read_pattern_grids(tpl);
        train_set = gen_letters(grids.patterns, opt.train_per_class, opt.corruption,
                                derive_seed(opt.seed, kTagTrainData));
        test_set = gen_letters(grids.patterns, opt.test_per_class, opt.corruption,
                               derive_seed(opt.seed, kTagTestData));
    } else if (opt.dataset == "mnist") {
        if (tpl.empty()) tpl = "data/digits_28x28.txt";
        if (opt.train_images.empty() || opt.train_labels.empty() || opt.test_images.empty() ||
            opt.test_labels.empty())
            throw Error("train --dataset mnist needs --train-images/--train-labels/--test-images/--test-labels");
        train_set = load_mnist_idx(opt.train_images, opt.train_labels);
        test_set = load_mnist_idx(opt.test_images, opt.test_labels);
        if (opt.train_subset > 0) train_set = head_subset(train_set, opt.train_subset);
        if (opt.test_subset > 0) test_set = head_subset(test_set, opt.test_subset);
        default_epochs = 30;
    } else {
        throw Error("unknown dataset: " + opt.dataset + " (expected letters|mnist)");
    }

    const PatternGrids grids = read_pattern_grids(tpl);
    const int n = grids.rows * grids.cols;
    if (train_set.dim != n)
        throw DimensionError("dataset dimension " + std::to_string(train_set.dim) +
                             " does not match template size " + std::to_string(n));
    const int k = static_cast<int>(grids.patterns.size());
    const double beta = 1.0 / std::sqrt(static_cast<double>(n));
    const double lambda = opt.blambda / beta;

    const Alphabet alphabet = solve_alphabet(lambda, opt.hill_c, beta);
    const AttractorSet attractors = make_attractors(grids.patterns, alphabet);
    SpectralCoupling sc = embed(new_spectral_coupling(n, k, lambda, opt.hill_c, derive_seed(opt.seed, kTagInit)),
                                attractors);

    TrainConfig cfg;
    cfg.learning_rate = opt.lr;
    cfg.batch_size = opt.batch;
    cfg.epochs = opt.epochs > 0 ? opt.epochs : default_epochs;
    cfg.integration.dt = opt.dt;
    cfg.integration.steps = opt.steps;
    cfg.integration.sigma = opt.sigma;
    cfg.grad_clip = opt.grad_clip;
    cfg.seed = derive_seed(opt.seed, kTagTrainLoop);
    cfg.detach_damping = opt.detach_damping;
    cfg.eval_realizations = opt.eval_realizations;

    TrainLog log;
    Model model = train(train_set, test_set, std::move(sc), attractors, cfg, &log, stderr);
    model.train_seed = opt.seed;

    char created_by[256];
    std::snprintf(created_by, sizeof created_by, "cvfr train --dataset %s --sigma %.17g --seed %llu",
                  opt.dataset.c_str(), opt.sigma, static_cast<unsigned long long>(opt.seed));
    save_checkpoint(opt.out, model, created_by);
    if (!opt.log_path.empty()) save_train_log_csv(opt.log_path, log);

    const EpochRecord& last = log.epochs.back();
    std::printf("final train accuracy %.4f\n", last.train_accuracy);
    std::printf("best test accuracy %.4f (epoch %d)\n", log.best_test_accuracy, log.best_epoch);
    std::printf("checkpoint written to %s\n", opt.out.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// eval / attack / stability / simulate
// ---------------------------------------------------------------------------

struct CriterionOptions {
    std::string criterion = "inner";
    double tau = 0.5;
    bool tau_absolute = false;
    bool state_space = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--criterion", criterion, "inner|l2")->check(CLI::IsMember({"inner", "l2"}));
        cmd->add_option("--tau", tau, "L2 acceptance threshold (default relative to ||X_k||)");
        cmd->add_flag("--tau-absolute", tau_absolute, "treat --tau as an absolute distance");
        cmd->add_flag("--state-space", state_space, "inner product against raw x(T) instead of f(x(T))");
    }

    Criterion build() const {
        Criterion c;
        c.kind = criterion == "l2" ? Criterion::Kind::l2_threshold : Criterion::Kind::inner_product;
        c.tau = tau;
        c.tau_relative = !tau_absolute;
        c.state_space = state_space;
        return c;
    }
};

int cmd_eval(const std::string& checkpoint, const DataSource& src, std::uint64_t seed, int realizations,
             const CriterionOptions& crit_opt) {
    const Model model = load_checkpoint(checkpoint);
    const LabeledDataset ds = src.load();
    EvalStats stats;
    const double acc = accuracy(model, ds, seed, realizations, crit_opt.build(), &stats);
    std::printf("accuracy %.6f on %zu items (sigma %.17g, realizations %d)\n", acc, ds.size(),
                model.integration.sigma, realizations);
    if (stats.integration_failures)
        std::printf("integration failures counted wrong: %zu\n", stats.integration_failures);
    if (stats.rejections) std::printf("rejected items: %zu\n", stats.rejections);
    return 0;
}

int cmd_attack(const std::vector<std::string>& checkpoints, const DataSource& src, const std::string& kind_str,
               const std::string& p_grid_str, const std::string& seeds_str, const std::string& out,
               int realizations, bool clip, const CriterionOptions& crit_opt) {
    if (kind_str != "A" && kind_str != "B") throw Error("--kind must be A or B");
    const std::vector<double> p_grid = parse_grid(p_grid_str);
    const std::vector<std::uint64_t> seeds = parse_seeds(seeds_str);
    const LabeledDataset ds = src.load();
    std::vector<Model> models;
    for (const auto& path : checkpoints) models.push_back(load_checkpoint(path));
    const RobustnessTable table =
        robustness_sweep(models, ds, kind_str[0], p_grid, seeds, realizations, crit_opt.build(), clip);
    std::printf("%-5s %-8s %-8s %-10s %s\n", "kind", "p", "sigma", "accuracy", "per-seed");
    for (const auto& row : table.rows) {
        std::printf("%-5c %-8.4g %-8.4g %-10.6f", row.kind, row.intensity, row.model_sigma, row.accuracy);
        for (double a : row.per_seed) std::printf(" %.6f", a);
        std::printf("\n");
    }
    if (!out.empty()) {
        write_robustness_csv(out, table);
        std::printf("wrote %s\n", out.c_str());
    }
    return 0;
}

int cmd_stability(const std::string& checkpoint, bool json) {
    const Model model = load_checkpoint(checkpoint);
    const StabilityReport report = stability_report(model.coupling, model.attractors);
    if (json) {
        std::printf("{\n  \"abscissa\": %.17g,\n  \"stable\": %s,\n  \"per_attractor\": [\n", report.abscissa,
                    report.stable ? "true" : "false");
        for (std::size_t i = 0; i < report.per_attractor.size(); ++i) {
            std::printf("    {\"class\": %d, \"abscissa\": %.17g, \"stationary\": %s}%s\n",
                        report.per_attractor[i].first, report.per_attractor[i].second,
                        report.stationary[i] ? "true" : "false",
                        i + 1 < report.per_attractor.size() ? "," : "");
        }
        std::printf("  ]\n}\n");
    } else {
        std::printf("%-8s %-24s %s\n", "class", "abscissa", "verdict");
        for (const auto& [k, absc] : report.per_attractor) {
            std::printf("%-8d %-24.12e %s\n", k, absc, absc < -kStabilityMargin ? "stable" : "NOT stable");
        }
        std::printf("overall: abscissa %.12e -> %s\n", report.abscissa,
                    report.stable ? "all attractors stable" : "NOT all attractors stable");
    }
    return 0; // instability is a reported result, not a command failure
}

int cmd_simulate(const std::string& checkpoint, const DataSource& src, std::size_t item_index, int node,
                 int realizations, std::uint64_t seed, const std::string& out, const std::string& traj_out,
                 const std::string& space, int steps_override) {
    Model model = load_checkpoint(checkpoint);
    if (steps_override > 0) model.integration.steps = steps_override;
    const LabeledDataset ds = src.load();
    if (item_index >= ds.size()) throw Error("--item-index beyond dataset size");
    const Vector& item = ds.items[item_index];
    if (!out.empty()) {
        const EnsembleStats stats = trajectory_ensemble(model, item, node, realizations, seed);
        write_ensemble_csv(out, stats);
        std::printf("wrote %s (item %zu, node %d, %d realizations)\n", out.c_str(), item_index, node,
                    realizations);
    }
    if (!traj_out.empty()) {
        const Matrix coupling = assemble(model.coupling);
        IntegrationConfig cfg = model.integration;
        cfg.seed = derive_seed(seed, 0);
        const Trajectory traj = integrate_stochastic(item, coupling, model.coupling.hill_c, model.coupling.beta,
                                                     model.attractors.states, cfg);
        write_trajectory_csv(traj_out, traj, space == "activity", model.coupling.hill_c);
        std::printf("wrote %s (%s space)\n", traj_out.c_str(), space.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"planted-attractor dynamical classifier"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (default: hardware)");

    GenDataOptions gen_opt;
    CLI::App* gen = app.add_subcommand("gen-data", "generate letters CSV or validate MNIST IDX files");
    gen->add_option("--dataset", gen_opt.dataset, "letters|mnist")->required();
    gen->add_option("--out", gen_opt.out, "output file")->required();
    gen->add_option("--seed", gen_opt.seed, "generation seed")->required();
    gen->add_option("--n-per-class", gen_opt.n_per_class, "items per class (letters)");
    gen->add_option("--corruption", gen_opt.corruption, "corrupted pixel fraction (letters)");
    gen->add_option("--templates", gen_opt.templates, "pattern grid file");
    gen->add_option("--images", gen_opt.images, "IDX images (mnist)");
    gen->add_option("--labels", gen_opt.labels, "IDX labels (mnist)");

    TrainOptions train_opt;
    CLI::App* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    tr->add_option("--dataset", train_opt.dataset, "letters|mnist")->required();
    tr->add_option("--out", train_opt.out, "checkpoint path")->required();
    tr->add_option("--seed", train_opt.seed, "master seed")->required();
    tr->add_option("--log", train_opt.log_path, "per-epoch CSV log");
    tr->add_option("--sigma", train_opt.sigma, "noise amplitude");
    tr->add_option("--dt", train_opt.dt, "Euler step");
    tr->add_option("--steps", train_opt.steps, "steps per trajectory");
    tr->add_option("--lr", train_opt.lr, "Adam learning rate");
    tr->add_option("--epochs", train_opt.epochs, "epochs (default 200 letters / 30 mnist)");
    tr->add_option("--batch", train_opt.batch, "mini-batch size");
    tr->add_option("--grad-clip", train_opt.grad_clip, "global gradient norm cap (0 disables)");
    tr->add_option("--templates", train_opt.templates, "attractor pattern grid file");
    tr->add_option("--train-per-class", train_opt.train_per_class, "letters: train items per class");
    tr->add_option("--test-per-class", train_opt.test_per_class, "letters: test items per class");
    tr->add_option("--corruption", train_opt.corruption, "letters: corrupted pixel fraction");
    tr->add_option("--blambda", train_opt.blambda, "beta*lambda of the planted eigenvalue");
    tr->add_option("--hill-c", train_opt.hill_c, "activation constant c");
    tr->add_option("--eval-realizations", train_opt.eval_realizations, "noise realizations per eval item");
    tr->add_flag("--detach-damping", train_opt.detach_damping, "drop the damping-factor gradient path");
    tr->add_option("--train-images", train_opt.train_images, "mnist: train IDX images");
    tr->add_option("--train-labels", train_opt.train_labels, "mnist: train IDX labels");
    tr->add_option("--test-images", train_opt.test_images, "mnist: test IDX images");
    tr->add_option("--test-labels", train_opt.test_labels, "mnist: test IDX labels");
    tr->add_option("--train-subset", train_opt.train_subset, "mnist: keep first N train items");
    tr->add_option("--test-subset", train_opt.test_subset, "mnist: keep first N test items");

    std::string eval_ckpt;
    DataSource eval_src;
    std::uint64_t eval_seed = 0;
    int eval_realizations = 1;
    CriterionOptions eval_crit;
    CLI::App* ev = app.add_subcommand("eval", "measure accuracy of a checkpoint on a dataset");
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
    ev->add_option("--seed", eval_seed, "evaluation seed")->required();
    ev->add_option("--realizations", eval_realizations, "noise realizations per item (majority vote)");
    eval_src.add_flags(ev);
    eval_crit.add_flags(ev);

    std::vector<std::string> attack_ckpts;
    DataSource attack_src;
    std::string attack_kind = "A", attack_pgrid, attack_seeds, attack_out;
    int attack_realizations = 1;
    bool attack_clip = false;
    CriterionOptions attack_crit;
    CLI::App* at = app.add_subcommand("attack", "robustness sweep over attack intensity");
    at->add_option("--checkpoint", attack_ckpts, "checkpoint path (repeatable)")->required();
    at->add_option("--kind", attack_kind, "A|B")->required();
    at->add_option("--p-grid", attack_pgrid, "comma-separated ascending intensities")->required();
    at->add_option("--seeds", attack_seeds, "comma-separated evaluation seeds")->required();
    at->add_option("--out", attack_out, "robustness CSV path");
    at->add_option("--realizations", attack_realizations, "noise realizations per item");
    at->add_flag("--clip", attack_clip, "clip attacked pixels to [0,1]");
    attack_src.add_flags(at);
    attack_crit.add_flags(at);

    std::string stab_ckpt;
    bool stab_json = false;
    CLI::App* st = app.add_subcommand("stability", "per-attractor spectral abscissa of a checkpoint");
    st->add_option("--checkpoint", stab_ckpt, "checkpoint path")->required();
    st->add_flag("--json", stab_json, "machine-readable output");

    std::string sim_ckpt, sim_out, sim_traj_out, sim_space = "activity";
    DataSource sim_src;
    std::size_t sim_item = 0;
    int sim_node = 0, sim_realizations = 100, sim_steps = 0;
    std::uint64_t sim_seed = 0;
    CLI::App* sim = app.add_subcommand("simulate", "trajectory ensembles and dumps from one input item");
    sim->add_option("--checkpoint", sim_ckpt, "checkpoint path")->required();
    sim->add_option("--item-index", sim_item, "item to simulate")->required();
    sim->add_option("--node", sim_node, "node tracked by the ensemble statistics");
    sim->add_option("--realizations", sim_realizations, "ensemble size");
    sim->add_option("--steps", sim_steps, "override the checkpoint's integration steps");
    sim->add_option("--seed", sim_seed, "simulation seed")->required();
    sim->add_option("--out", sim_out, "ensemble CSV path");
    sim->add_option("--traj-out", sim_traj_out, "full trajectory CSV of realization 0");
    sim->add_option("--space", sim_space, "state|activity columns for --traj-out")
        ->check(CLI::IsMember({"state", "activity"}));
    sim_src.add_flags(sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (threads > 0) set_num_threads(threads);
        if (gen->parsed()) return cmd_gen_data(gen_opt);
        if (tr->parsed()) return cmd_train(train_opt);
        if (ev->parsed()) return cmd_eval(eval_ckpt, eval_src, eval_seed, eval_realizations, eval_crit);
        if (at->parsed())
            return cmd_attack(attack_ckpts, attack_src, attack_kind, attack_pgrid, attack_seeds, attack_out,
                              attack_realizations, attack_clip, attack_crit);
        if (st->parsed()) return cmd_stability(stab_ckpt, stab_json);
        if (sim->parsed())
            return cmd_simulate(sim_ckpt, sim_src, sim_item, sim_node, sim_realizations, sim_seed, sim_out,
                                sim_traj_out, sim_space, sim_steps);
    } catch (const NonFiniteStateError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const SingularMatrixError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const DivergenceAbortError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const RealityConditionError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
