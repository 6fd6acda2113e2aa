#include "xrfpid/spectrum_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xrfpid/errors.hpp"

namespace xrfpid {

namespace {

constexpr char kCubeMagic[4] = {'X', 'C', 'U', 'B'};
constexpr std::uint32_t kCubeVersion = 1;

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double parse_header_double(const std::string& value, const std::string& path,
                           long line_no) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad numeric value \"" + value + "\"", path, line_no);
    }
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::istream& in, T* v) {
    in.read(reinterpret_cast<char*>(v), sizeof(T));
    return static_cast<bool>(in);
}

}  // namespace

Spectrum read_spectrum(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spectrum \"" + path + "\"");

    std::string line;
    long line_no = 0;
    if (!std::getline(in, line))
        throw ParseError("empty spectrum file", path, 1);
    ++line_no;
    if (line.rfind("xsp", 0) != 0) {
        // a bare number on line 1 is the legacy headerless layout
        std::istringstream probe(line);
        double v;
        if (probe >> v)
            throw ParseError(
                "headerless spectrum file; prepend an xsp header "
                "(xsp 1 / offset / gain / channels / data) to convert",
                path, 1);
        throw ParseError("not an xsp file (missing magic)", path, 1);
    }

    Spectrum s;
    bool have_offset = false, have_gain = false, have_channels = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream iss(line);
        std::string key;
        if (!(iss >> key)) continue;
        if (key == "data") break;
        std::string value;
        if (!(iss >> value))
            throw ParseError("header key \"" + key + "\" without value", path,
                             line_no);
        if (key == "offset") {
            s.calibration.offset_kev = parse_header_double(value, path, line_no);
            have_offset = true;
        } else if (key == "gain") {
            s.calibration.gain_kev_per_ch = parse_header_double(value, path, line_no);
            have_gain = true;
        } else if (key == "channels") {
            s.calibration.channel_count =
                static_cast<int>(parse_header_double(value, path, line_no));
            have_channels = true;
        } else if (key == "live_time") {
            s.live_time_s = parse_header_double(value, path, line_no);
        } else {
            throw ParseError("unknown header key \"" + key + "\"", path, line_no);
        }
    }
    if (!have_offset || !have_gain || !have_channels)
        throw ParseError("header missing offset/gain/channels", path, line_no);

    s.counts.reserve(s.calibration.channel_count);
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream iss(line);
        std::string value;
        if (!(iss >> value)) continue;
        s.counts.push_back(parse_header_double(value, path, line_no));
    }
    if (s.channels() != s.calibration.channel_count)
        throw ParseError("expected " + std::to_string(s.calibration.channel_count) +
                             " counts, found " + std::to_string(s.channels()),
                         path, line_no);
    validate_spectrum(s);
    return s;
}

void write_spectrum(const Spectrum& s, const std::string& path) {
    validate_spectrum(s);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write spectrum \"" + path + "\"");
    out << "xsp 1\n";
    out << "offset " << format_double(s.calibration.offset_kev) << "\n";
    out << "gain " << format_double(s.calibration.gain_kev_per_ch) << "\n";
    out << "channels " << s.calibration.channel_count << "\n";
    if (s.live_time_s > 0.0)
        out << "live_time " << format_double(s.live_time_s) << "\n";
    out << "data\n";
    for (double c : s.counts) out << format_double(c) << "\n";
    if (!out) throw IoError("short write to \"" + path + "\"");
}

SpectralCube read_cube(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cube \"" + path + "\"");

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kCubeMagic, 4) != 0)
        throw IoError("\"" + path + "\" is not an xcube file (bad magic)");
    std::uint32_t version = 0;
    if (!read_raw(in, &version))
        throw IoError("truncated cube header in \"" + path + "\"");
    if (version != kCubeVersion)
        throw IoError("unsupported cube version " + std::to_string(version) +
                      " in \"" + path + "\" (expected " +
                      std::to_string(kCubeVersion) + ")");

    std::uint32_t w = 0, h = 0, ch = 0;
    double offset = 0, gain = 0, step = 0, live = 0;
    if (!read_raw(in, &w) || !read_raw(in, &h) || !read_raw(in, &ch) ||
        !read_raw(in, &offset) || !read_raw(in, &gain) || !read_raw(in, &step) ||
        !read_raw(in, &live))
        throw IoError("truncated cube header in \"" + path + "\"");

    SpectralCube cube;
    cube.width = static_cast<int>(w);
    cube.height = static_cast<int>(h);
    cube.step_mm = step;
    cube.calibration = {offset, gain, static_cast<int>(ch)};
    const std::size_t n = static_cast<std::size_t>(w) * h * ch;
    cube.counts.resize(n);
    in.read(reinterpret_cast<char*>(cube.counts.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    const std::size_t got = static_cast<std::size_t>(in.gcount());
    if (got != n * sizeof(float))
        throw IoError("truncated cube \"" + path + "\": expected " +
                      std::to_string(n * sizeof(float)) + " payload bytes, got " +
                      std::to_string(got));
    char extra;
    if (in.read(&extra, 1))
        throw IoError("trailing bytes after cube payload in \"" + path + "\"");
    return cube;
}

void write_cube(const SpectralCube& cube, const std::string& path) {
    if (cube.counts.size() != cube.pixel_count() *
                                  static_cast<std::size_t>(
                                      cube.calibration.channel_count))
        throw ValidationError("cube payload size does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write cube \"" + path + "\"");
    out.write(kCubeMagic, 4);
    write_raw(out, kCubeVersion);
    write_raw(out, static_cast<std::uint32_t>(cube.width));
    write_raw(out, static_cast<std::uint32_t>(cube.height));
    write_raw(out, static_cast<std::uint32_t>(cube.calibration.channel_count));
    write_raw(out, cube.calibration.offset_kev);
    write_raw(out, cube.calibration.gain_kev_per_ch);
    write_raw(out, cube.step_mm);
    write_raw(out, 0.0);  // live time slot, unset
    out.write(reinterpret_cast<const char*>(cube.counts.data()),
              static_cast<std::streamsize>(cube.counts.size() * sizeof(float)));
    if (!out) throw IoError("short write to \"" + path + "\"");
}

}  // namespace xrfpid
