#include "xrfpid/corpus.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "xrfpid/errors.hpp"
#include "xrfpid/kernels.hpp"
#include "xrfpid/spectrum_io.hpp"

namespace xrfpid {

namespace {

namespace fs = std::filesystem;

constexpr char kFeatureMagic[4] = {'X', 'F', 'T', 'R'};
constexpr std::uint32_t kFeatureVersion = 1;

void write_manifest(const CorpusManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest \"" + path + "\"");
    out << "xrfcorpus 1\n";
    out << "kind " << m.kind << "\n";
    out << "count " << m.count << "\n";
    out << "seed " << m.master_seed << "\n";
    out.precision(17);
    out << "offset " << m.calibration.offset_kev << "\n";
    out << "gain " << m.calibration.gain_kev_per_ch << "\n";
    out << "channels " << m.calibration.channel_count << "\n";
    out << "columns index group labels seed stack\n";
    for (std::uint64_t i = 0; i < m.count; ++i)
        out << "entry " << i << " " << m.groups[i] << " "
            << m.labels[i].to_string() << " " << m.seeds[i] << " " << m.stacks[i]
            << "\n";
    if (!out) throw IoError("short write to \"" + path + "\"");
}

template <typename EntryFn>
void write_corpus_impl(std::uint64_t count, const EnergyCalibration& cal,
                       const std::string& kind, std::uint64_t master_seed,
                       const PigmentLibrary& lib, const std::string& dir,
                       const EntryFn& make_entry) {
    if (count == 0) throw ConfigError("corpus would be empty");
    fs::create_directories(dir);

    CorpusManifest manifest;
    manifest.kind = kind;
    manifest.count = count;
    manifest.master_seed = master_seed;
    manifest.calibration = cal;
    manifest.groups.resize(count);
    manifest.labels.resize(count);
    manifest.seeds.resize(count);
    manifest.stacks.resize(count);

    SpectralCube pack = make_cube(static_cast<int>(count), 1, cal);

    const std::int64_t n = static_cast<std::int64_t>(count);
    const int threads = kernels::jobs();
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(threads) \
    if (threads > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            CorpusEntry entry = make_entry(static_cast<std::uint64_t>(i));
            manifest.groups[i] = entry.group;
            manifest.labels[i] = entry.labels;
            manifest.seeds[i] = entry.seed;
            manifest.stacks[i] = entry.stack.describe(lib);
            float* dst = pack.pixel(static_cast<int>(i), 0);
            for (int ch = 0; ch < cal.channel_count; ++ch)
                dst[ch] = static_cast<float>(entry.spectrum.counts[ch]);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    write_manifest(manifest, (fs::path(dir) / "corpus.manifest").string());
    write_cube(pack, (fs::path(dir) / "spectra.xcube").string());
}

}  // namespace

void write_simulation_corpus(const SimConfig& config, const PigmentLibrary& lib,
                             const PhysicsTable& table,
                             const std::string& dir) {
    write_corpus_impl(
        simulation_corpus_size(config), config.detector.calibration,
        "simulation", config.noise_seed, lib, dir, [&](std::uint64_t i) {
            return simulation_corpus_entry(config, lib, table, i);
        });
}

void write_mixture_corpus(const MixtureCorpusConfig& config,
                          const PigmentLibrary& lib, const PhysicsTable& table,
                          const std::string& dir) {
    write_corpus_impl(mixture_corpus_size(config), config.detector.calibration,
                      "mixture", config.seed, lib, dir, [&](std::uint64_t i) {
                          return mixture_corpus_entry(config, lib, table, i);
                      });
}

CorpusManifest read_corpus_manifest(const std::string& dir) {
    const std::string path = (fs::path(dir) / "corpus.manifest").string();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest \"" + path + "\"");

    CorpusManifest m;
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line) || line.rfind("xrfcorpus", 0) != 0)
        throw ParseError("not a corpus manifest", path, 1);
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream iss(line);
        std::string key;
        if (!(iss >> key)) continue;
        if (key == "kind") iss >> m.kind;
        else if (key == "count") iss >> m.count;
        else if (key == "seed") iss >> m.master_seed;
        else if (key == "offset") iss >> m.calibration.offset_kev;
        else if (key == "gain") iss >> m.calibration.gain_kev_per_ch;
        else if (key == "channels") iss >> m.calibration.channel_count;
        else if (key == "columns") continue;
        else if (key == "entry") {
            std::uint64_t index = 0, seed = 0;
            int group = 0;
            std::string labels, stack;
            if (!(iss >> index >> group >> labels >> seed >> stack))
                throw ParseError("malformed entry", path, line_no);
            if (index != m.groups.size())
                throw ParseError("entries out of order", path, line_no);
            m.groups.push_back(group);
            m.labels.push_back(LabelVector::from_string(labels));
            m.seeds.push_back(seed);
            m.stacks.push_back(stack);
        } else {
            throw ParseError("unknown manifest key \"" + key + "\"", path,
                             line_no);
        }
    }
    if (m.groups.size() != m.count)
        throw ParseError("manifest lists " + std::to_string(m.groups.size()) +
                             " entries but declares " + std::to_string(m.count),
                         path, line_no);
    return m;
}

LoadedCorpus read_corpus(const std::string& dir) {
    LoadedCorpus corpus;
    corpus.manifest = read_corpus_manifest(dir);
    corpus.spectra = read_cube((fs::path(dir) / "spectra.xcube").string());
    if (static_cast<std::uint64_t>(corpus.spectra.width) !=
            corpus.manifest.count ||
        corpus.spectra.height != 1)
        throw ValidationError("spectra pack does not match the manifest");
    return corpus;
}

void FeatureDataset::append(const float* feat, const std::uint8_t* label,
                            std::int32_t group) {
    features.insert(features.end(), feat, feat + dim);
    labels.insert(labels.end(), label, label + classes);
    groups.push_back(group);
}

FeatureDataset preprocess_corpus(const LoadedCorpus& corpus,
                                 const PreprocessConfig& config,
                                 const Spectrum* inject) {
    const std::uint64_t n = corpus.manifest.count;
    FeatureDataset data;
    data.dim = config.expected_length > 0 ? config.expected_length : 0;
    if (n == 0) return data;

    if (data.dim == 0) {
        Spectrum probe = corpus.spectrum(0);
        if (inject) probe = inject_background(probe, *inject);
        data.dim = crop(probe, config).channels();
    }
    data.features.resize(n * static_cast<std::uint64_t>(data.dim));
    data.labels.resize(n * static_cast<std::uint64_t>(data.classes));
    data.groups.resize(n);

    const int threads = kernels::jobs();
    const std::int64_t count = static_cast<std::int64_t>(n);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads) \
    if (threads > 1)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            Spectrum s = corpus.spectrum(static_cast<std::uint64_t>(i));
            if (inject) s = inject_background(s, *inject);
            FeatureVector f = preprocess_spectrum(s, config);
            if (f.size() != data.dim)
                throw DimensionError("inconsistent feature length in corpus");
            std::memcpy(data.features.data() +
                            static_cast<std::uint64_t>(i) * data.dim,
                        f.values.data(), sizeof(float) * data.dim);
            const LabelVector& lv = corpus.manifest.labels[i];
            for (int j = 0; j < data.classes; ++j)
                data.labels[static_cast<std::uint64_t>(i) * data.classes + j] =
                    lv.bits[j] ? 1 : 0;
            data.groups[i] = corpus.manifest.groups[i];
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return data;
}

void write_features(const FeatureDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write features \"" + path + "\"");
    out.write(kFeatureMagic, 4);
    auto write_pod = [&out](auto v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    write_pod(kFeatureVersion);
    write_pod(static_cast<std::uint64_t>(data.size()));
    write_pod(static_cast<std::uint32_t>(data.dim));
    write_pod(static_cast<std::uint32_t>(data.classes));
    out.write(reinterpret_cast<const char*>(data.features.data()),
              static_cast<std::streamsize>(data.features.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(data.labels.data()),
              static_cast<std::streamsize>(data.labels.size()));
    out.write(reinterpret_cast<const char*>(data.groups.data()),
              static_cast<std::streamsize>(data.groups.size() *
                                           sizeof(std::int32_t)));
    if (!out) throw IoError("short write to \"" + path + "\"");
}

FeatureDataset read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open features \"" + path + "\"");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0)
        throw IoError("\"" + path + "\" is not a feature file (bad magic)");
    auto read_pod = [&in, &path](auto* v, const char* what) {
        in.read(reinterpret_cast<char*>(v), sizeof(*v));
        if (!in)
            throw IoError("truncated feature file \"" + path + "\" at " + what);
    };
    std::uint32_t version = 0;
    read_pod(&version, "version");
    if (version != kFeatureVersion)
        throw IoError("unsupported feature file version " +
                      std::to_string(version));
    std::uint64_t n = 0;
    std::uint32_t dim = 0, classes = 0;
    read_pod(&n, "sample count");
    read_pod(&dim, "dimension");
    read_pod(&classes, "class count");

    FeatureDataset data;
    data.dim = static_cast<int>(dim);
    data.classes = static_cast<int>(classes);
    data.features.resize(n * dim);
    data.labels.resize(n * classes);
    data.groups.resize(n);
    in.read(reinterpret_cast<char*>(data.features.data()),
            static_cast<std::streamsize>(data.features.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(data.labels.data()),
            static_cast<std::streamsize>(data.labels.size()));
    in.read(reinterpret_cast<char*>(data.groups.data()),
            static_cast<std::streamsize>(data.groups.size() *
                                         sizeof(std::int32_t)));
    if (!in) throw IoError("truncated feature file \"" + path + "\"");
    return data;
}

}  // namespace xrfpid
