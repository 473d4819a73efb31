#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "textkernel/evaluation.hpp"
#include "textkernel/labelgen.hpp"
#include "textkernel/raster.hpp"

namespace textkernel {

// PMAP container: "PMAP" magic, u16 version = 1, u32 height/width/channels,
// all little-endian, then H*W*C little-endian f32, row-major channel-last.
// 18-byte header; total file size 18 + 4*H*W*C. The reader reports the byte
// offset of the first inconsistency (bad magic/version, truncation, trailing
// bytes, non-finite values).
ProbMap read_pmap(const std::string& path);
void write_pmap(const std::string& path, const ProbMap& map);

// Binary (P5) PGM, maxval 255.
void write_pgm(const std::string& path, const Raster<std::uint8_t>& raster);
Raster<std::uint8_t> read_pgm(const std::string& path);

// NDJSON, one object per line.
// Annotations: {"polygon": [[x,y],...], "ignore": bool?, "text": string?}
// Detections:  {"polygon": [[x,y],...], "score": real}
std::vector<Annotation> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<Annotation>& annots);
std::vector<Detection> read_detections(const std::string& path);
void write_detections(const std::string& path, const std::vector<Detection>& dets);

struct ManifestEntry {
    std::string id;
    int width = 0;
    int height = 0;
};

// NDJSON manifest: {"id": string, "width": int, "height": int} per line.
std::vector<ManifestEntry> read_manifest(const std::string& path);

// All writers go through this: write to <path>.tmp, then rename into place.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

// Worker count: TEXTKERNEL_THREADS env var wins, then the requested value,
// then hardware concurrency; always >= 1.
int resolve_workers(int requested);

// Runs fn(0..n-1) on `workers` threads (inline when workers <= 1 or n <= 1).
// The first exception thrown, if any, is rethrown on the caller's thread.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace textkernel
