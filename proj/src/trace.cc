#include "strait/trace.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace strait {

namespace {

constexpr std::string_view kKindNames[] = {
    "arrival",    "drop",       "schedule", "transfer_start", "transfer_end",
    "kernel_start", "kernel_end", "feedback", "complete",      "clow"};

constexpr std::string_view kHeader =
    "time,event,gpu,batch,request,model,priority,size,v0,v1,v2,v3,v4,v5";

void AppendDouble(std::string& out, double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", x);
  out.append(buf, static_cast<std::size_t>(n));
}

double ParseDouble(const std::string& s) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::invalid_argument("bad number: " + s);
  return x;
}

}  // namespace

std::string_view ToString(TraceKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

TraceKind ParseTraceKind(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == s) return static_cast<TraceKind>(i);
  }
  throw std::invalid_argument("unknown trace event: " + std::string(s));
}

std::string_view TraceCsvHeader() { return kHeader; }

std::string EventTrace::ToCsv() const {
  std::string out(kHeader);
  out += '\n';
  for (const auto& e : events) {
    AppendDouble(out, e.time);
    out += ',';
    out += ToString(e.kind);
    out += ',' + std::to_string(e.gpu) + ',' + std::to_string(e.batch) + ',' +
           std::to_string(e.request) + ',' + e.model + ',';
    out += ToString(e.priority);
    out += ',' + std::to_string(e.size);
    for (double x : e.v) {
      out += ',';
      AppendDouble(out, x);
    }
    out += '\n';
  }
  if (truncated) out += "# truncated\n";
  return out;
}

EventTrace EventTrace::FromCsv(const std::string& text) {
  EventTrace trace;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::vector<std::string> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "# truncated") {
      trace.truncated = true;
      continue;
    }
    if (header) {
      header = false;
      if (line != kHeader) throw std::invalid_argument("unexpected trace header");
      continue;
    }
    cols.clear();
    std::istringstream fields(line);
    std::string f;
    while (std::getline(fields, f, ',')) cols.push_back(f);
    if (cols.size() != 14) {
      throw std::invalid_argument("trace row has " + std::to_string(cols.size()) +
                                  " columns: " + line);
    }
    TraceEvent e;
    e.time = ParseDouble(cols[0]);
    e.kind = ParseTraceKind(cols[1]);
    e.gpu = std::stoi(cols[2]);
    e.batch = std::stoll(cols[3]);
    e.request = std::stoll(cols[4]);
    e.model = cols[5];
    e.priority = ParsePriority(cols[6]);
    e.size = std::stoi(cols[7]);
    for (std::size_t i = 0; i < e.v.size(); ++i) e.v[i] = ParseDouble(cols[8 + i]);
    trace.events.push_back(std::move(e));
  }
  return trace;
}

void EventTrace::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << ToCsv();
}

EventTrace EventTrace::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromCsv(ss.str());
}

std::uint64_t EventTrace::Hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : ToCsv()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace strait
