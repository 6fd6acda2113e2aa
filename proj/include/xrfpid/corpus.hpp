#ifndef XRFPID_CORPUS_HPP
#define XRFPID_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "xrfpid/preprocess.hpp"
#include "xrfpid/simulate.hpp"

namespace xrfpid {

// A corpus directory holds corpus.manifest (text: index, group, label bits,
// seed, stack description) and spectra.xcube (count x 1 raster pack).
struct CorpusManifest {
    std::string kind;  // "simulation" or "mixture"
    std::uint64_t count = 0;
    std::uint64_t master_seed = 0;
    EnergyCalibration calibration;
    std::vector<int> groups;
    std::vector<LabelVector> labels;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> stacks;
};

struct LoadedCorpus {
    CorpusManifest manifest;
    SpectralCube spectra;  // width = count, height = 1

    Spectrum spectrum(std::uint64_t index) const {
        return spectra.spectrum_at(static_cast<int>(index), 0);
    }
};

// Generate and write a corpus; entries are produced in parallel chunks with
// per-entry seeds, so any worker count yields identical bytes.
void write_simulation_corpus(const SimConfig& config, const PigmentLibrary& lib,
                             const PhysicsTable& table, const std::string& dir);
void write_mixture_corpus(const MixtureCorpusConfig& config,
                          const PigmentLibrary& lib, const PhysicsTable& table,
                          const std::string& dir);

CorpusManifest read_corpus_manifest(const std::string& dir);
LoadedCorpus read_corpus(const std::string& dir);

// Row-major feature matrix with label bytes and stack-type groups.
struct FeatureDataset {
    int dim = 0;
    int classes = kClassCount;
    std::vector<float> features;        // [n][dim]
    std::vector<std::uint8_t> labels;   // [n][classes]
    std::vector<std::int32_t> groups;   // [n]

    std::size_t size() const { return groups.size(); }
    const float* row(std::size_t i) const { return features.data() + i * dim; }
    const std::uint8_t* label_row(std::size_t i) const {
        return labels.data() + i * classes;
    }
    void append(const float* feat, const std::uint8_t* label, std::int32_t group);
};

// Crop + transform every corpus spectrum (parallel over entries); optional
// additive background applied first.
FeatureDataset preprocess_corpus(const LoadedCorpus& corpus,
                                 const PreprocessConfig& config = {},
                                 const Spectrum* inject = nullptr);

// .xfeat binary container (docs/formats.md).
void write_features(const FeatureDataset& data, const std::string& path);
FeatureDataset read_features(const std::string& path);

}  // namespace xrfpid

#endif
