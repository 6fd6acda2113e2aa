// xrfpid: simulate layered-pigment XRF spectra, train the classifier, and
// render per-pixel pigment maps.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "xrfpid/analysis.hpp"
#include "xrfpid/corpus.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/image_io.hpp"
#include "xrfpid/kernels.hpp"
#include "xrfpid/rng.hpp"
#include "xrfpid/spectrum_io.hpp"
#include "xrfpid/train.hpp"

namespace fs = std::filesystem;
using namespace xrfpid;

namespace {

constexpr const char* kDefaultDataDir = XRFPID_DATA_DIR;

// ---------------------------------------------------------------------------
// config file: lines of "section.key = value", '#' comments

struct ConfigFile {
    std::map<std::string, std::string> entries;
    std::set<std::string> consumed;

    void load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config \"" + path + "\"");
        std::string raw;
        long line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            auto hash = raw.find('#');
            std::string line =
                hash == std::string::npos ? raw : raw.substr(0, hash);
            auto eq = line.find('=');
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t");
                if (b == std::string::npos) return std::string();
                auto e = s.find_last_not_of(" \t");
                return s.substr(b, e - b + 1);
            };
            if (eq == std::string::npos) {
                if (!trim(line).empty())
                    throw ParseError("expected key = value", path, line_no);
                continue;
            }
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty() || key.find('.') == std::string::npos)
                throw ParseError("config keys are section.key", path, line_no);
            entries[key] = value;
        }
    }

    template <typename T>
    void apply(const CLI::App* sub, const std::string& flag, T* target) {
        const std::string key = sub->get_name() + "." + flag;
        auto it = entries.find(key);
        if (it == entries.end()) return;
        consumed.insert(key);
        if (sub->count("--" + flag) > 0) return;  // command line wins
        std::istringstream iss(it->second);
        if constexpr (std::is_same_v<T, bool>) {
            *target = it->second == "true" || it->second == "1" ||
                      it->second == "yes";
        } else if constexpr (std::is_same_v<T, std::string>) {
            *target = it->second;
        } else {
            if (!(iss >> *target))
                throw ConfigError("bad value for " + key + ": \"" + it->second +
                                  "\"");
        }
    }

    void reject_unknown(const std::string& section) const {
        for (const auto& [key, value] : entries) {
            if (key.rfind(section + ".", 0) != 0) continue;
            if (!consumed.count(key))
                throw ConfigError("unknown config key \"" + key + "\"");
        }
    }
};

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 0;
    std::string physics_path = std::string(kDefaultDataDir) + "/physics.dat";
    std::string library_path;  // empty = built-in
    ConfigFile config;

    PigmentLibrary library() const {
        return library_path.empty() ? default_pigment_library()
                                    : load_pigment_library(library_path);
    }
    PhysicsTable physics(const PigmentLibrary& lib) const {
        return load_physics_table(physics_path, lib);
    }
};

// every run persists the values it actually used
class ResolvedConfig {
public:
    explicit ResolvedConfig(const std::string& section) : section_(section) {}

    template <typename T>
    void set(const std::string& key, const T& value) {
        std::ostringstream os;
        os.precision(17);
        if constexpr (std::is_same_v<T, bool>)
            os << (value ? "true" : "false");
        else
            os << value;
        lines_.emplace_back(section_ + "." + key, os.str());
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write resolved config \"" + path + "\"");
        for (const auto& [key, value] : lines_)
            out << key << " = " << value << "\n";
    }

private:
    std::string section_;
    std::vector<std::pair<std::string, std::string>> lines_;
};

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step" inclusive arithmetic grid
    double lo = 0, hi = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream iss(spec);
    if (!(iss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
        step <= 0 || hi < lo)
        throw ConfigError("bad grid \"" + spec + "\", expected lo:hi:step");
    std::vector<double> grid;
    for (double v = lo; v <= hi + 1e-9; v += step) grid.push_back(v);
    return grid;
}

std::pair<double, double> parse_range(const std::string& spec) {
    double lo = 0, hi = 0;
    char c = 0;
    std::istringstream iss(spec);
    if (!(iss >> lo >> c >> hi) || c != ':' || hi < lo)
        throw ConfigError("bad range \"" + spec + "\", expected lo:hi");
    return {lo, hi};
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash \"" + path + "\"");
    std::uint64_t h = 1469598103934665603ull;
    char buffer[65536];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buffer[i]);
            h *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof(buffer))) break;
    }
    return h;
}

std::vector<std::string> class_names(const PigmentLibrary& lib) {
    std::vector<std::string> names;
    for (const Pigment* p : lib.classes()) names.push_back(p->abbreviation);
    return names;
}

void write_run_manifest(const std::string& path, const ResolvedConfig& config,
                        const std::vector<std::pair<std::string, std::string>>&
                            facts,
                        const std::vector<TrainResult>& runs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write run manifest \"" + path + "\"");
    out << "# xrfpid run manifest\n";
    for (const auto& [key, value] : facts) out << key << " = " << value << "\n";
    out.precision(9);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        out << "run " << r << " best_epoch " << runs[r].best_epoch
            << " best_val_loss " << runs[r].best_val_loss << "\n";
        for (std::size_t e = 0; e < runs[r].history.size(); ++e)
            out << "epoch " << r << " " << e << " train "
                << runs[r].history[e].train_loss << " val "
                << runs[r].history[e].val_loss << "\n";
    }
    (void)config;
}

// deterministic train/validation split of a dataset
void split_train_val(std::size_t n, double val_fraction, std::uint64_t seed,
                     std::vector<std::uint32_t>* train,
                     std::vector<std::uint32_t>* val) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x7ea10000ull));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    std::size_t n_val =
        std::max<std::size_t>(1, static_cast<std::size_t>(val_fraction * n));
    if (n_val + 2 > n) throw ConfigError("dataset too small to split");
    val->assign(order.begin(), order.begin() + n_val);
    train->assign(order.begin() + n_val, order.end());
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string out;
    std::string mode = "grid";  // grid | mixtures
    std::string top_grid = "50:200:10";
    std::string bottom_grid = "100:150:10";
    std::string top_range = "30:200";
    std::string bottom_range = "100:150";
    std::string ground_range = "150:200";
    std::string background = "default";
    std::uint64_t count = 1600;
    std::uint64_t subsample = 0;
    double ground_thickness = 175.0;
    double flux = 1.0e6;
    double binder = 0.25;
    double tube_kv = 40.0;
    bool no_poisson = false;
    bool dedupe = false;
};

void run_simulate(const GlobalOptions& global, const SimulateOptions& opt) {
    const PigmentLibrary lib = global.library();
    const PhysicsTable table = global.physics(lib);

    Spectrum background;
    if (opt.background == "default")
        background = read_spectrum(std::string(kDefaultDataDir) +
                                   "/default_background.xsp");
    else if (opt.background != "none")
        background = read_spectrum(opt.background);

    fs::create_directories(opt.out);
    ResolvedConfig resolved("simulate");
    resolved.set("mode", opt.mode);
    resolved.set("seed", global.seed);
    resolved.set("background", opt.background);
    resolved.set("flux", opt.flux);
    resolved.set("binder", opt.binder);
    resolved.set("tube-kv", opt.tube_kv);
    resolved.set("poisson", !opt.no_poisson);

    if (opt.mode == "grid") {
        SimConfig config;
        config.geometry.tube_voltage_kv = opt.tube_kv;
        config.geometry.flux_scale = opt.flux;
        config.top_thickness_grid = parse_grid(opt.top_grid);
        config.bottom_thickness_grid = parse_grid(opt.bottom_grid);
        config.ground_thickness_um = opt.ground_thickness;
        config.background = background;
        config.noise_seed = global.seed;
        config.poisson = !opt.no_poisson;
        config.binder_mass_fraction = opt.binder;
        config.dedupe = opt.dedupe;

        resolved.set("top-grid", opt.top_grid);
        resolved.set("bottom-grid", opt.bottom_grid);
        resolved.set("ground-thickness", opt.ground_thickness);
        resolved.set("dedupe", opt.dedupe);
        resolved.set("subsample", opt.subsample);

        if (opt.subsample > 0) {
            const std::uint64_t full = simulation_corpus_size(config);
            if (opt.subsample > full)
                throw ConfigError("subsample exceeds the grid size");
            std::vector<std::uint64_t> indices(full);
            std::iota(indices.begin(), indices.end(), 0);
            Rng rng(derive_seed(global.seed, 0x5ab50000ull));
            for (std::size_t i = indices.size(); i > 1; --i)
                std::swap(indices[i - 1], indices[rng.uniform_index(i)]);
            indices.resize(opt.subsample);
            std::sort(indices.begin(), indices.end());
            write_simulation_corpus_subset(config, lib, table, indices, opt.out);
        } else {
            write_simulation_corpus(config, lib, table, opt.out);
        }
        std::cout << "simulate: wrote "
                  << read_corpus_manifest(opt.out).count << " entries to "
                  << opt.out << "\n";
    } else if (opt.mode == "mixtures") {
        MixtureCorpusConfig config;
        config.geometry.tube_voltage_kv = opt.tube_kv;
        config.geometry.flux_scale = opt.flux;
        config.count = opt.count;
        config.top_thickness_um = parse_range(opt.top_range);
        config.bottom_thickness_um = parse_range(opt.bottom_range);
        config.ground_thickness_um = parse_range(opt.ground_range);
        config.background = background;
        config.seed = global.seed;
        config.poisson = !opt.no_poisson;
        config.binder_mass_fraction = opt.binder;

        resolved.set("count", opt.count);
        resolved.set("top-range", opt.top_range);
        resolved.set("bottom-range", opt.bottom_range);
        resolved.set("ground-range", opt.ground_range);

        write_mixture_corpus(config, lib, table, opt.out);
        std::cout << "simulate: wrote " << config.count
                  << " mixture entries to " << opt.out << "\n";
    } else {
        throw ConfigError("simulate mode must be 'grid' or 'mixtures'");
    }
    resolved.write((fs::path(opt.out) / "resolved.cfg").string());
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessOptions {
    std::string in;
    std::string out;
    std::string background;       // extra additive background, .xsp
    std::string emit_background;  // estimate + save instead of features
    double crop_energy = kCropEnergyKev;
    int length = kFeatureLength;
    bool no_normalize = false;
    int snip_iterations = 24;
    int snip_smooth = 3;
};

void run_preprocess(const GlobalOptions& global, const PreprocessOptions& opt) {
    (void)global;
    LoadedCorpus corpus = read_corpus(opt.in);

    if (!opt.emit_background.empty()) {
        // mean spectrum, then the iterative clipping estimate
        Spectrum mean;
        mean.calibration = corpus.spectra.calibration;
        mean.counts.assign(mean.calibration.channel_count, 0.0);
        for (std::uint64_t i = 0; i < corpus.manifest.count; ++i) {
            Spectrum s = corpus.spectrum(i);
            for (int ch = 0; ch < mean.channels(); ++ch)
                mean.counts[ch] += s.counts[ch];
        }
        for (double& c : mean.counts)
            c /= static_cast<double>(corpus.manifest.count);
        Spectrum estimate = snip_background(
            mean, SnipParams{opt.snip_iterations, opt.snip_smooth});
        write_spectrum(estimate, opt.emit_background);
        std::cout << "preprocess: wrote background estimate to "
                  << opt.emit_background << "\n";
        return;
    }

    if (opt.out.empty())
        throw ConfigError("preprocess needs --out (or --emit-background)");

    PreprocessConfig config;
    config.crop_energy_kev = opt.crop_energy;
    config.expected_length = opt.length;
    config.normalization =
        opt.no_normalize ? Normalization::None : Normalization::Max;

    std::optional<Spectrum> inject;
    if (!opt.background.empty()) inject = read_spectrum(opt.background);

    FeatureDataset data =
        preprocess_corpus(corpus, config, inject ? &*inject : nullptr);
    write_features(data, opt.out);

    ResolvedConfig resolved("preprocess");
    resolved.set("in", opt.in);
    resolved.set("out", opt.out);
    resolved.set("crop-energy", opt.crop_energy);
    resolved.set("length", opt.length);
    resolved.set("normalize", !opt.no_normalize);
    resolved.set("background", opt.background.empty() ? "none" : opt.background);
    resolved.write(opt.out + ".resolved.cfg");
    std::cout << "preprocess: wrote " << data.size() << " feature rows to "
              << opt.out << "\n";
}

// ---------------------------------------------------------------------------
// train / crossvalidate / finetune

struct TrainOptions {
    std::string features;
    std::string out;
    double lr = 0.001;
    int batch = 64;
    int epochs = 150;
    int patience = 10;
    double val_fraction = 0.15;
};

void run_train(const GlobalOptions& global, const TrainOptions& opt) {
    FeatureDataset data = read_features(opt.features);
    if (data.size() == 0) throw ConfigError("feature file is empty");

    TrainConfig config;
    config.lr = opt.lr;
    config.batch_size = opt.batch;
    config.max_epochs = opt.epochs;
    config.patience = opt.patience;
    config.seed = global.seed;

    ArchSpec arch = ArchSpec::classifier();
    arch.input_length = data.dim;
    if (data.classes != arch.num_classes)
        throw ShapeError("feature file carries " + std::to_string(data.classes) +
                         " classes, classifier expects " +
                         std::to_string(arch.num_classes));

    std::vector<std::uint32_t> train_idx, val_idx;
    split_train_val(data.size(), opt.val_fraction, global.seed, &train_idx,
                    &val_idx);
    Network<float> net(arch);
    net.init_weights(derive_seed(global.seed, 0x1c1a0000ull));
    TrainResult result = train(net, DatasetView{&data, train_idx},
                               DatasetView{&data, val_idx}, config);
    save_model(net, opt.out);

    ResolvedConfig resolved("train");
    resolved.set("features", opt.features);
    resolved.set("out", opt.out);
    resolved.set("lr", opt.lr);
    resolved.set("batch", opt.batch);
    resolved.set("epochs", opt.epochs);
    resolved.set("patience", opt.patience);
    resolved.set("val-fraction", opt.val_fraction);
    resolved.set("seed", global.seed);
    resolved.write(opt.out + ".resolved.cfg");
    write_run_manifest(
        opt.out + ".manifest",
        resolved,
        {{"features", opt.features},
         {"features_fnv64", std::to_string(fnv1a_file(opt.features))},
         {"seed", std::to_string(global.seed)},
         {"train_size", std::to_string(train_idx.size())},
         {"val_size", std::to_string(val_idx.size())}},
        {result});
    std::cout << "train: " << result.history.size() << " epochs, best val loss "
              << result.best_val_loss << " at epoch " << result.best_epoch
              << ", model saved to " << opt.out << "\n";
}

struct CrossValOptions {
    std::string features;
    std::string out;
    double lr = 0.001;
    int batch = 64;
    int epochs = 150;
    int patience = 10;
};

void run_crossvalidate(const GlobalOptions& global, const CrossValOptions& opt) {
    FeatureDataset data = read_features(opt.features);
    TrainConfig config;
    config.lr = opt.lr;
    config.batch_size = opt.batch;
    config.max_epochs = opt.epochs;
    config.patience = opt.patience;
    config.seed = global.seed;

    ArchSpec arch = ArchSpec::classifier();
    arch.input_length = data.dim;
    CrossValResult cv = crossvalidate(data, arch, config);

    fs::create_directories(opt.out);
    for (int f = 0; f < 5; ++f)
        save_model(cv.models[f],
                   (fs::path(opt.out) / ("fold" + std::to_string(f) + ".xnn"))
                       .string());
    save_model(cv.models[cv.best_fold],
               (fs::path(opt.out) / "best.xnn").string());

    const PigmentLibrary lib = global.library();
    write_metrics_csv(cv.mean_metrics, class_names(lib),
                      (fs::path(opt.out) / "metrics.csv").string());

    ResolvedConfig resolved("crossvalidate");
    resolved.set("features", opt.features);
    resolved.set("out", opt.out);
    resolved.set("lr", opt.lr);
    resolved.set("batch", opt.batch);
    resolved.set("epochs", opt.epochs);
    resolved.set("patience", opt.patience);
    resolved.set("seed", global.seed);
    resolved.write((fs::path(opt.out) / "resolved.cfg").string());
    write_run_manifest(
        (fs::path(opt.out) / "run.manifest").string(), resolved,
        {{"features", opt.features},
         {"features_fnv64", std::to_string(fnv1a_file(opt.features))},
         {"seed", std::to_string(global.seed)},
         {"best_fold", std::to_string(cv.best_fold)}},
        cv.fold_runs);

    double mf1 = macro_f1(cv.mean_metrics);
    std::cout << "crossvalidate: best fold " << cv.best_fold << ", macro F1 "
              << mf1 << ", outputs in " << opt.out << "\n";
}

struct FinetuneOptions {
    std::string features;
    std::string pretrained;
    std::string out;
    double fraction = 0.2;
    double lr = 0.001;
    double lr2 = 0.0005;
    int batch = 64;
    int patience = 10;
    int phase1_epochs = 30;
    int phase2_epochs = 120;
    bool no_stratify = false;
};

void run_finetune(const GlobalOptions& global, const FinetuneOptions& opt) {
    FeatureDataset data = read_features(opt.features);
    Network<float> pretrained = load_model(opt.pretrained);

    FinetuneConfig config;
    config.base.lr = opt.lr;
    config.base.batch_size = opt.batch;
    config.base.patience = opt.patience;
    config.base.seed = global.seed;
    config.phase2_lr = opt.lr2;
    config.phase1_epochs = opt.phase1_epochs;
    config.phase2_epochs = opt.phase2_epochs;
    config.finetune_fraction = opt.fraction;
    config.stratified = !opt.no_stratify;

    FinetuneResult result = finetune(pretrained, data, config);
    save_model(result.model, opt.out);

    // before/after comparison on the held-out split
    DatasetView test_view{&data, result.test_indices};
    auto before_counts = evaluate_confusion(pretrained, test_view);
    auto after_counts = evaluate_confusion(result.model, test_view);
    std::vector<ClassMetrics> before, after;
    for (const auto& c : before_counts) before.push_back(compute_metrics(c));
    for (const auto& c : after_counts) after.push_back(compute_metrics(c));

    const PigmentLibrary lib = global.library();
    write_metrics_csv(after, class_names(lib), opt.out + ".metrics.csv");
    write_metrics_csv(before, class_names(lib), opt.out + ".pretrained_metrics.csv");

    ResolvedConfig resolved("finetune");
    resolved.set("features", opt.features);
    resolved.set("pretrained", opt.pretrained);
    resolved.set("out", opt.out);
    resolved.set("fraction", opt.fraction);
    resolved.set("lr", opt.lr);
    resolved.set("lr2", opt.lr2);
    resolved.set("batch", opt.batch);
    resolved.set("patience", opt.patience);
    resolved.set("phase1-epochs", opt.phase1_epochs);
    resolved.set("phase2-epochs", opt.phase2_epochs);
    resolved.set("stratify", !opt.no_stratify);
    resolved.set("seed", global.seed);
    resolved.write(opt.out + ".resolved.cfg");
    write_run_manifest(
        opt.out + ".manifest", resolved,
        {{"features", opt.features},
         {"features_fnv64", std::to_string(fnv1a_file(opt.features))},
         {"seed", std::to_string(global.seed)},
         {"finetune_size", std::to_string(result.finetune_indices.size())},
         {"test_size", std::to_string(result.test_indices.size())}},
        {result.phase1, result.phase2});
    std::cout << "finetune: " << result.finetune_indices.size() << " / "
              << result.test_indices.size() << " split, macro F1 "
              << macro_f1(before) << " -> " << macro_f1(after)
              << ", model saved to " << opt.out << "\n";
}

// ---------------------------------------------------------------------------
// predict / evaluate

struct PredictOptions {
    std::string features;
    std::string model;
    std::string out;
    std::string truth_out;
};

void run_predict(const GlobalOptions& global, const PredictOptions& opt) {
    FeatureDataset data = read_features(opt.features);
    Network<float> net = load_model(opt.model);
    if (net.arch().input_length != data.dim)
        throw ShapeError("model input " +
                         std::to_string(net.arch().input_length) +
                         " does not match feature length " +
                         std::to_string(data.dim));
    DatasetView view = full_view(data);
    std::vector<float> probs = predict_view(net, view);

    const PigmentLibrary lib = global.library();
    auto names = class_names(lib);
    auto write_table = [&](const std::string& path, bool truth) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write \"" + path + "\"");
        out << "index";
        for (const auto& n : names) out << "," << n;
        out << "\n";
        out.precision(7);
        for (std::size_t i = 0; i < data.size(); ++i) {
            out << i;
            for (int j = 0; j < data.classes; ++j) {
                if (truth)
                    out << "," << static_cast<int>(data.label_row(i)[j]);
                else
                    out << "," << probs[i * data.classes + j];
            }
            out << "\n";
        }
    };
    write_table(opt.out, false);
    if (!opt.truth_out.empty()) write_table(opt.truth_out, true);
    std::cout << "predict: wrote " << data.size() << " rows to " << opt.out
              << "\n";
}

struct EvaluateOptions {
    std::string pred;
    std::string truth;
    std::string out;
    double threshold = 0.5;
};

std::vector<std::vector<double>> read_csv_table(const std::string& path,
                                                std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open \"" + path + "\"");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty csv", path, 1);
    header->clear();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header->push_back(cell);
    std::vector<std::vector<double>> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("bad number \"" + cell + "\"", path, line_no);
            }
        }
        if (row.size() != header->size())
            throw ParseError("row width mismatch", path, line_no);
        rows.push_back(std::move(row));
    }
    return rows;
}

void run_evaluate(const GlobalOptions& global, const EvaluateOptions& opt) {
    std::vector<std::string> pred_header, truth_header;
    auto pred = read_csv_table(opt.pred, &pred_header);
    auto truth = read_csv_table(opt.truth, &truth_header);
    if (pred_header != truth_header)
        throw ValidationError("prediction and truth headers differ");
    if (pred.size() != truth.size())
        throw ValidationError("prediction and truth row counts differ");
    const int classes = static_cast<int>(pred_header.size()) - 1;
    if (classes < 1) throw ValidationError("csv has no class columns");

    std::vector<ConfusionCounts> counts(classes);
    std::vector<float> probs(classes);
    std::vector<std::uint8_t> bits(classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (int j = 0; j < classes; ++j) {
            probs[j] = static_cast<float>(pred[i][j + 1]);
            bits[j] = truth[i][j + 1] != 0.0 ? 1 : 0;
        }
        accumulate_confusion(probs.data(), bits.data(), 1, classes,
                             opt.threshold, counts);
    }
    std::vector<ClassMetrics> metrics;
    for (const auto& c : counts) metrics.push_back(compute_metrics(c));
    std::vector<std::string> names(pred_header.begin() + 1, pred_header.end());
    write_metrics_csv(metrics, names, opt.out);
    (void)global;
    std::cout << "evaluate: macro F1 " << macro_f1(metrics) << ", wrote "
              << opt.out << "\n";
}

// ---------------------------------------------------------------------------
// map

struct MapOptions {
    std::string cube;
    std::string model;
    std::string out;
    double clip = 99.0;
    double window = 0.2;
    double crop_energy = kCropEnergyKev;
    double threshold = 0.5;
};

// the detectable elements of a pigment, heaviest mass fraction first
std::vector<std::pair<ElementId, LineSeries>> signature_lines(
    const Pigment& pigment, const PhysicsTable& table) {
    std::vector<std::pair<double, ElementId>> candidates;
    for (const auto& [el, w] : pigment.composition)
        if (el.atomic_number >= 19 && !table.lines_of(el).empty())
            candidates.emplace_back(w, el);
    std::sort(candidates.rbegin(), candidates.rend(),
              [](const auto& a, const auto& b) { return a < b; });
    std::vector<std::pair<ElementId, LineSeries>> out;
    for (const auto& [w, el] : candidates) {
        if (out.size() == 2) break;
        if (table.find_line(el, LineSeries::Ka))
            out.emplace_back(el, LineSeries::Ka);
        else if (table.find_line(el, LineSeries::La))
            out.emplace_back(el, LineSeries::La);
    }
    return out;
}

void run_map(const GlobalOptions& global, const MapOptions& opt) {
    const PigmentLibrary lib = global.library();
    const PhysicsTable table = global.physics(lib);
    SpectralCube cube = read_cube(opt.cube);
    Network<float> model = load_model(opt.model);

    PreprocessConfig config;
    config.crop_energy_kev = opt.crop_energy;
    config.expected_length = model.arch().input_length;
    PigmentMaps maps = classify_cube(model, cube, config);

    fs::create_directories(fs::path(opt.out) / "maps");
    fs::create_directories(fs::path(opt.out) / "overlays");
    fs::create_directories(fs::path(opt.out) / "scatter");

    const auto classes = lib.classes();
    for (std::size_t cls = 0; cls < classes.size(); ++cls) {
        const std::string& abbrev = classes[cls]->abbreviation;
        std::vector<float> raster(maps.map(static_cast<int>(cls)),
                                  maps.map(static_cast<int>(cls)) +
                                      cube.pixel_count());
        write_pgm16(raster, cube.width, cube.height,
                    (fs::path(opt.out) / "maps" / (abbrev + ".pgm")).string());

        auto lines = signature_lines(*classes[cls], table);
        std::vector<ElementMap> element_maps;
        for (const auto& [el, series] : lines) {
            try {
                element_maps.push_back(
                    element_map(cube, table, el, series, opt.window));
            } catch (const RangeError&) {
                // line outside this cube's energy range; skip the channel
            }
        }
        std::vector<const ElementMap*> refs;
        for (const auto& m : element_maps) refs.push_back(&m);

        OverlayImage img =
            overlay(raster, cube.width, cube.height, refs, opt.clip);
        write_png_rgb(img, (fs::path(opt.out) / "overlays" /
                            (abbrev + ".png"))
                               .string());
        if (!refs.empty()) {
            auto rows = scatter_data(raster, cube.width, cube.height, refs,
                                     refs.size() > 1 ? ScatterReduction::Min
                                                     : ScatterReduction::Single);
            write_scatter_csv(rows, (fs::path(opt.out) / "scatter" /
                                     (abbrev + ".csv"))
                                        .string());
        }
    }

    ResolvedConfig resolved("map");
    resolved.set("cube", opt.cube);
    resolved.set("model", opt.model);
    resolved.set("out", opt.out);
    resolved.set("clip", opt.clip);
    resolved.set("window", opt.window);
    resolved.set("crop-energy", opt.crop_energy);
    resolved.write((fs::path(opt.out) / "resolved.cfg").string());
    std::cout << "map: wrote maps/overlays/scatter for " << classes.size()
              << " classes to " << opt.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "xrfpid: layered-pigment identification from XRF spectra.\n"
        "Simulates training corpora, trains the 1-D CNN classifier, and "
        "renders per-pixel pigment probability maps."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "print help for every subcommand");

    GlobalOptions global;
    if (const char* env = std::getenv("XRFPID_SEED"))
        global.seed = std::strtoull(env, nullptr, 10);
    app.add_option("--config", global.config_path,
                   "config file with section.key = value lines");
    auto* seed_opt =
        app.add_option("--seed", global.seed,
                       "master seed (fallback: XRFPID_SEED, then 0)");
    app.add_option("--jobs", global.jobs,
                   "worker threads; 1 = serial reference, 0 = all cores");
    app.add_option("--physics", global.physics_path, "physics table path");
    app.add_option("--library", global.library_path,
                   "pigment library path (default: built-in)");

    SimulateOptions sim;
    auto* sim_cmd =
        app.add_subcommand("simulate", "generate a spectra corpus");
    sim_cmd->add_option("--out", sim.out, "output corpus directory")
        ->required();
    sim_cmd->add_option("--mode", sim.mode, "grid | mixtures");
    sim_cmd->add_option("--top-grid", sim.top_grid, "top thickness grid µm");
    sim_cmd->add_option("--bottom-grid", sim.bottom_grid,
                        "bottom thickness grid µm");
    sim_cmd->add_option("--count", sim.count, "mixture corpus size");
    sim_cmd->add_option("--subsample", sim.subsample,
                        "random subsample of the grid (0 = full)");
    sim_cmd->add_option("--top-range", sim.top_range,
                        "mixture top thickness range µm");
    sim_cmd->add_option("--bottom-range", sim.bottom_range,
                        "mixture bottom thickness range µm");
    sim_cmd->add_option("--ground-range", sim.ground_range,
                        "mixture ground thickness range µm");
    sim_cmd->add_option("--ground-thickness", sim.ground_thickness,
                        "grid ground thickness µm");
    sim_cmd->add_option("--background", sim.background,
                        "default | none | path.xsp");
    sim_cmd->add_option("--flux", sim.flux, "tube flux scale");
    sim_cmd->add_option("--binder", sim.binder, "binder mass fraction");
    sim_cmd->add_option("--tube-kv", sim.tube_kv, "tube voltage kV");
    sim_cmd->add_flag("--no-poisson", sim.no_poisson, "skip Poisson noise");
    sim_cmd->add_flag("--dedupe", sim.dedupe,
                      "collapse duplicate absent-layer entries");

    PreprocessOptions pre;
    auto* pre_cmd = app.add_subcommand(
        "preprocess", "crop + transform a corpus into features");
    pre_cmd->add_option("--in", pre.in, "corpus directory")->required();
    pre_cmd->add_option("--out", pre.out, "output .xfeat file");
    pre_cmd->add_option("--background", pre.background,
                        "additive background .xsp applied before the crop");
    pre_cmd->add_option("--emit-background", pre.emit_background,
                        "estimate the corpus background and write it here");
    pre_cmd->add_option("--crop-energy", pre.crop_energy, "crop energy keV");
    pre_cmd->add_option("--length", pre.length,
                        "expected feature length (0 = free)");
    pre_cmd->add_flag("--no-normalize", pre.no_normalize,
                      "skip per-spectrum max normalization");
    pre_cmd->add_option("--snip-iterations", pre.snip_iterations,
                        "clipping window count");
    pre_cmd->add_option("--snip-smooth", pre.snip_smooth,
                        "pre-smooth width, channels");

    TrainOptions tr;
    auto* tr_cmd = app.add_subcommand("train", "train the classifier");
    tr_cmd->add_option("--features", tr.features, "input .xfeat")->required();
    tr_cmd->add_option("--out", tr.out, "output .xnn model")->required();
    tr_cmd->add_option("--lr", tr.lr, "learning rate");
    tr_cmd->add_option("--batch", tr.batch, "batch size");
    tr_cmd->add_option("--epochs", tr.epochs, "epoch cap");
    tr_cmd->add_option("--patience", tr.patience, "early-stop patience");
    tr_cmd->add_option("--val-fraction", tr.val_fraction,
                       "validation holdout fraction");

    CrossValOptions cv;
    auto* cv_cmd =
        app.add_subcommand("crossvalidate", "five-fold cross-validation");
    cv_cmd->add_option("--features", cv.features, "input .xfeat")->required();
    cv_cmd->add_option("--out", cv.out, "output directory")->required();
    cv_cmd->add_option("--lr", cv.lr, "learning rate");
    cv_cmd->add_option("--batch", cv.batch, "batch size");
    cv_cmd->add_option("--epochs", cv.epochs, "epoch cap");
    cv_cmd->add_option("--patience", cv.patience, "early-stop patience");

    FinetuneOptions ft;
    auto* ft_cmd = app.add_subcommand(
        "finetune", "two-phase transfer finetuning of a pretrained model");
    ft_cmd->add_option("--features", ft.features, "target .xfeat")->required();
    ft_cmd->add_option("--pretrained", ft.pretrained, "pretrained .xnn")
        ->required();
    ft_cmd->add_option("--out", ft.out, "output .xnn model")->required();
    ft_cmd->add_option("--fraction", ft.fraction, "finetune data fraction");
    ft_cmd->add_option("--lr", ft.lr, "phase-1 learning rate");
    ft_cmd->add_option("--lr2", ft.lr2, "phase-2 learning rate");
    ft_cmd->add_option("--batch", ft.batch, "batch size");
    ft_cmd->add_option("--patience", ft.patience, "early-stop patience");
    ft_cmd->add_option("--phase1-epochs", ft.phase1_epochs, "phase-1 cap");
    ft_cmd->add_option("--phase2-epochs", ft.phase2_epochs, "phase-2 cap");
    ft_cmd->add_flag("--no-stratify", ft.no_stratify,
                     "plain random finetune split");

    PredictOptions pr;
    auto* pr_cmd =
        app.add_subcommand("predict", "per-sample class probabilities");
    pr_cmd->add_option("--features", pr.features, "input .xfeat")->required();
    pr_cmd->add_option("--model", pr.model, "model .xnn")->required();
    pr_cmd->add_option("--out", pr.out, "output predictions csv")->required();
    pr_cmd->add_option("--truth-out", pr.truth_out,
                       "also write the ground-truth labels csv");

    EvaluateOptions ev;
    auto* ev_cmd =
        app.add_subcommand("evaluate", "metrics from predictions vs truth");
    ev_cmd->add_option("--pred", ev.pred, "predictions csv")->required();
    ev_cmd->add_option("--truth", ev.truth, "truth csv")->required();
    ev_cmd->add_option("--out", ev.out, "output metrics.csv")->required();
    ev_cmd->add_option("--threshold", ev.threshold, "decision threshold");

    MapOptions mp;
    auto* mp_cmd = app.add_subcommand(
        "map", "pigment maps, overlays and scatter data for a cube");
    mp_cmd->add_option("--cube", mp.cube, "input .xcube")->required();
    mp_cmd->add_option("--model", mp.model, "model .xnn")->required();
    mp_cmd->add_option("--out", mp.out, "output directory")->required();
    mp_cmd->add_option("--clip", mp.clip, "overlay clip percentile");
    mp_cmd->add_option("--window", mp.window, "element ROI half-width keV");
    mp_cmd->add_option("--crop-energy", mp.crop_energy, "crop energy keV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!global.config_path.empty()) {
            global.config.load(global.config_path);
            auto& cfg = global.config;
            // global section
            if (!seed_opt->count()) {
                auto it = cfg.entries.find("global.seed");
                if (it != cfg.entries.end()) {
                    global.seed = std::strtoull(it->second.c_str(), nullptr, 10);
                    cfg.consumed.insert("global.seed");
                }
            } else {
                cfg.consumed.insert("global.seed");
            }
            cfg.apply(&app, "jobs", &global.jobs);
            // subcommand sections
            cfg.apply(sim_cmd, "mode", &sim.mode);
            cfg.apply(sim_cmd, "top-grid", &sim.top_grid);
            cfg.apply(sim_cmd, "bottom-grid", &sim.bottom_grid);
            cfg.apply(sim_cmd, "count", &sim.count);
            cfg.apply(sim_cmd, "subsample", &sim.subsample);
            cfg.apply(sim_cmd, "top-range", &sim.top_range);
            cfg.apply(sim_cmd, "bottom-range", &sim.bottom_range);
            cfg.apply(sim_cmd, "ground-range", &sim.ground_range);
            cfg.apply(sim_cmd, "ground-thickness", &sim.ground_thickness);
            cfg.apply(sim_cmd, "background", &sim.background);
            cfg.apply(sim_cmd, "flux", &sim.flux);
            cfg.apply(sim_cmd, "binder", &sim.binder);
            cfg.apply(sim_cmd, "tube-kv", &sim.tube_kv);
            cfg.apply(sim_cmd, "no-poisson", &sim.no_poisson);
            cfg.apply(sim_cmd, "dedupe", &sim.dedupe);
            cfg.apply(pre_cmd, "crop-energy", &pre.crop_energy);
            cfg.apply(pre_cmd, "length", &pre.length);
            cfg.apply(pre_cmd, "no-normalize", &pre.no_normalize);
            cfg.apply(pre_cmd, "snip-iterations", &pre.snip_iterations);
            cfg.apply(pre_cmd, "snip-smooth", &pre.snip_smooth);
            cfg.apply(pre_cmd, "background", &pre.background);
            cfg.apply(tr_cmd, "lr", &tr.lr);
            cfg.apply(tr_cmd, "batch", &tr.batch);
            cfg.apply(tr_cmd, "epochs", &tr.epochs);
            cfg.apply(tr_cmd, "patience", &tr.patience);
            cfg.apply(tr_cmd, "val-fraction", &tr.val_fraction);
            cfg.apply(cv_cmd, "lr", &cv.lr);
            cfg.apply(cv_cmd, "batch", &cv.batch);
            cfg.apply(cv_cmd, "epochs", &cv.epochs);
            cfg.apply(cv_cmd, "patience", &cv.patience);
            cfg.apply(ft_cmd, "fraction", &ft.fraction);
            cfg.apply(ft_cmd, "lr", &ft.lr);
            cfg.apply(ft_cmd, "lr2", &ft.lr2);
            cfg.apply(ft_cmd, "batch", &ft.batch);
            cfg.apply(ft_cmd, "patience", &ft.patience);
            cfg.apply(ft_cmd, "phase1-epochs", &ft.phase1_epochs);
            cfg.apply(ft_cmd, "phase2-epochs", &ft.phase2_epochs);
            cfg.apply(ft_cmd, "no-stratify", &ft.no_stratify);
            cfg.apply(ev_cmd, "threshold", &ev.threshold);
            cfg.apply(mp_cmd, "clip", &mp.clip);
            cfg.apply(mp_cmd, "window", &mp.window);
            cfg.apply(mp_cmd, "crop-energy", &mp.crop_energy);
            for (const CLI::App* sub : app.get_subcommands())
                cfg.reject_unknown(sub->get_name());
            cfg.reject_unknown("global");
        }

        kernels::set_jobs(global.jobs);

        if (sim_cmd->parsed()) run_simulate(global, sim);
        if (pre_cmd->parsed()) run_preprocess(global, pre);
        if (tr_cmd->parsed()) run_train(global, tr);
        if (cv_cmd->parsed()) run_crossvalidate(global, cv);
        if (ft_cmd->parsed()) run_finetune(global, ft);
        if (pr_cmd->parsed()) run_predict(global, pr);
        if (ev_cmd->parsed()) run_evaluate(global, ev);
        if (mp_cmd->parsed()) run_map(global, mp);
    } catch (const Error& e) {
        std::cerr << "xrfpid: error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "xrfpid: unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
