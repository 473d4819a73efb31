#include "textkernel/io.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "textkernel/errors.hpp"

namespace textkernel {
namespace {

using nlohmann::json;

std::uint32_t read_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8 & 0xff));
    out.push_back(static_cast<char>(v >> 16 & 0xff));
    out.push_back(static_cast<char>(v >> 24 & 0xff));
}

Polygon parse_polygon(const json& j, const std::string& path, std::size_t line_no) {
    const auto fail = [&](const std::string& why) -> DataFormatError {
        return DataFormatError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    if (!j.is_array() || j.size() < 3) throw fail("polygon needs >= 3 [x,y] pairs");
    std::vector<Point> pts;
    pts.reserve(j.size());
    for (const json& v : j) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            throw fail("polygon vertices must be [x,y] numbers");
        }
        pts.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    try {
        return Polygon(std::move(pts));
    } catch (const InvalidGeometryError& e) {
        throw fail(e.what());
    }
}

json polygon_json(const Polygon& p) {
    json arr = json::array();
    for (const Point& q : p.vertices()) {
        arr.push_back(json::array({q.x, q.y}));
    }
    return arr;
}

// Applies fn to every parsed NDJSON line of the file.
void for_each_record(const std::string& path,
                     const std::function<void(const json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataFormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        fn(j, line_no);
    }
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NotFoundError("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataFormatError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

ProbMap read_pmap(const std::string& path) {
    const std::string bytes = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const auto fail = [&](std::size_t offset, const std::string& why) -> DataFormatError {
        return DataFormatError(path + ": " + why + " (offset " + std::to_string(offset) + ")");
    };
    if (bytes.size() < 18) throw fail(bytes.size(), "truncated header");
    if (std::memcmp(p, "PMAP", 4) != 0) throw fail(0, "bad magic, expected PMAP");
    const std::uint16_t version = static_cast<std::uint16_t>(p[4] | p[5] << 8);
    if (version != 1) throw fail(4, "unsupported version " + std::to_string(version));
    const std::uint32_t h = read_u32le(p + 6);
    const std::uint32_t w = read_u32le(p + 10);
    const std::uint32_t c = read_u32le(p + 14);
    const std::uint64_t values = static_cast<std::uint64_t>(h) * w * c;
    const std::uint64_t expected = 18 + 4 * values;
    if (bytes.size() != expected) {
        throw fail(std::min<std::uint64_t>(bytes.size(), expected),
                   "payload length mismatch, expected " + std::to_string(expected) +
                       " bytes, got " + std::to_string(bytes.size()));
    }
    ProbMap map(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (std::uint64_t i = 0; i < values; ++i) {
        const std::uint32_t bits = read_u32le(p + 18 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        if (!std::isfinite(f)) throw fail(18 + 4 * i, "non-finite value");
        map.data[i] = f;
    }
    return map;
}

void write_pmap(const std::string& path, const ProbMap& map) {
    std::string out;
    out.reserve(18 + 4 * map.data.size());
    out.append("PMAP");
    out.push_back(1);
    out.push_back(0);
    put_u32le(out, static_cast<std::uint32_t>(map.height));
    put_u32le(out, static_cast<std::uint32_t>(map.width));
    put_u32le(out, static_cast<std::uint32_t>(map.channels));
    for (double v : map.data) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32le(out, bits);
    }
    write_file_atomic(path, out);
}

void write_pgm(const std::string& path, const Raster<std::uint8_t>& raster) {
    std::string out =
        "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(raster.data.data()), raster.data.size());
    write_file_atomic(path, out);
}

Raster<std::uint8_t> read_pgm(const std::string& path) {
    const std::string bytes = read_file(path);
    std::istringstream in(bytes);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataFormatError(path + ": not a P5 PGM");
    auto next_int = [&]() {
        int v;
        while (in >> std::ws && in.peek() == '#') {
            std::string comment;
            std::getline(in, comment);
        }
        if (!(in >> v)) throw DataFormatError(path + ": bad PGM header");
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
        throw DataFormatError(path + ": bad PGM dimensions");
    }
    in.get();  // single whitespace after maxval
    Raster<std::uint8_t> raster(h, w);
    const std::size_t off = static_cast<std::size_t>(in.tellg());
    if (bytes.size() - off < raster.data.size()) {
        throw DataFormatError(path + ": truncated PGM payload");
    }
    std::memcpy(raster.data.data(), bytes.data() + off, raster.data.size());
    return raster;
}

std::vector<Annotation> read_annotations(const std::string& path) {
    std::vector<Annotation> out;
    for_each_record(path, [&](const json& j, std::size_t line_no) {
        if (!j.contains("polygon")) {
            throw DataFormatError(path + ":" + std::to_string(line_no) + ": missing polygon");
        }
        Annotation a{parse_polygon(j.at("polygon"), path, line_no)};
        a.ignore = j.value("ignore", false);
        if (j.contains("text") && j.at("text").is_string()) {
            a.text = j.at("text").get<std::string>();
        }
        out.push_back(std::move(a));
    });
    return out;
}

void write_annotations(const std::string& path, const std::vector<Annotation>& annots) {
    std::string out;
    for (const Annotation& a : annots) {
        json j;
        j["polygon"] = polygon_json(a.polygon);
        j["ignore"] = a.ignore;
        if (a.text) j["text"] = *a.text;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<Detection> read_detections(const std::string& path) {
    std::vector<Detection> out;
    for_each_record(path, [&](const json& j, std::size_t line_no) {
        if (!j.contains("polygon") || !j.contains("score") || !j.at("score").is_number()) {
            throw DataFormatError(path + ":" + std::to_string(line_no) +
                                  ": detection needs polygon and numeric score");
        }
        out.push_back({parse_polygon(j.at("polygon"), path, line_no), j.at("score").get<double>()});
    });
    return out;
}

void write_detections(const std::string& path, const std::vector<Detection>& dets) {
    std::string out;
    for (const Detection& d : dets) {
        json j;
        j["polygon"] = polygon_json(d.polygon);
        j["score"] = d.score;
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::vector<ManifestEntry> out;
    for_each_record(path, [&](const json& j, std::size_t line_no) {
        if (!j.contains("id") || !j.contains("width") || !j.contains("height")) {
            throw DataFormatError(path + ":" + std::to_string(line_no) +
                                  ": manifest entry needs id, width, height");
        }
        out.push_back({j.at("id").get<std::string>(), j.at("width").get<int>(),
                       j.at("height").get<int>()});
    });
    return out;
}

int resolve_workers(int requested) {
    if (const char* env = std::getenv("TEXTKERNEL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr error;
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(body);
    for (std::thread& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace textkernel
