#include "crowdbelief/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "crowdbelief/errors.hpp"

namespace crowdbelief {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open " + path.string() + " for reading");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cannot open " + path.string() + " for writing");
  }
  return out;
}

void expect_header(std::ifstream& in, const std::filesystem::path& path,
                   const std::string& expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw io_error(path.string() + ": empty file, expected header `" + expected + "`");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) {
    throw io_error(path.string() + ": bad header `" + line + "`, expected `" + expected + "`");
  }
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw io_error("bad " + what + " field: `" + s + "`");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw io_error("bad " + what + " field: `" + s + "`");
  }
}

template <typename RowFn>
void read_rows(const std::filesystem::path& path, const std::string& header,
               std::size_t n_fields, RowFn&& fn) {
  auto in = open_input(path);
  expect_header(in, path, header);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != n_fields) {
      throw io_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                     std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
    }
    fn(fields);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<ForecastRow> read_forecast_csv(const std::filesystem::path& path) {
  std::vector<ForecastRow> rows;
  read_rows(path, "question_id,expert_id,day,prob,expertise", 5, [&](const auto& f) {
    ForecastRow r;
    r.question_id = f[0];
    r.expert_id = f[1];
    r.day = parse_int(f[2], "day");
    r.prob = parse_double(f[3], "prob");
    r.expertise = parse_int(f[4], "expertise");
    if (r.expertise < 1 || r.expertise > 5) {
      throw io_error(path.string() + ": expertise must lie in 1..5, got " + f[4]);
    }
    if (!(r.prob >= 0.0 && r.prob <= 1.0)) {
      throw io_error(path.string() + ": prob must lie in [0, 1], got " + f[3]);
    }
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastRow>& rows) {
  auto out = open_output(path);
  out << "question_id,expert_id,day,prob,expertise\n";
  for (const auto& r : rows) {
    out << r.question_id << ',' << r.expert_id << ',' << r.day << ','
        << format_double(r.prob) << ',' << r.expertise << '\n';
  }
}

std::vector<OutcomeRow> read_outcome_csv(const std::filesystem::path& path) {
  std::vector<OutcomeRow> rows;
  read_rows(path, "question_id,horizon,outcome", 3, [&](const auto& f) {
    OutcomeRow r;
    r.question_id = f[0];
    r.horizon = parse_int(f[1], "horizon");
    if (!f[2].empty()) {
      const int z = parse_int(f[2], "outcome");
      if (z != 0 && z != 1) {
        throw io_error(path.string() + ": outcome must be 0 or 1, got " + f[2]);
      }
      r.outcome = z;
    }
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_outcome_csv(const std::filesystem::path& path, const std::vector<OutcomeRow>& rows) {
  auto out = open_output(path);
  out << "question_id,horizon,outcome\n";
  for (const auto& r : rows) {
    out << r.question_id << ',' << r.horizon << ',';
    if (r.outcome) out << *r.outcome;
    out << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path& path) {
  std::vector<AggregateRow> rows;
  read_rows(path, "question_id,day,mean_prob,lo95,hi95", 5, [&](const auto& f) {
    AggregateRow r;
    r.question_id = f[0];
    r.day = parse_int(f[1], "day");
    r.mean_prob = parse_double(f[2], "mean_prob");
    if (!f[3].empty()) r.lo95 = parse_double(f[3], "lo95");
    if (!f[4].empty()) r.hi95 = parse_double(f[4], "hi95");
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  auto out = open_output(path);
  out << "question_id,day,mean_prob,lo95,hi95\n";
  for (const auto& r : rows) {
    out << r.question_id << ',' << r.day << ',' << format_double(r.mean_prob) << ',';
    if (r.lo95) out << format_double(*r.lo95);
    out << ',';
    if (r.hi95) out << format_double(*r.hi95);
    out << '\n';
  }
}

std::vector<TruthRow> read_truth_csv(const std::filesystem::path& path) {
  std::vector<TruthRow> rows;
  read_rows(path, "question_id,day,x_true,p_true", 4, [&](const auto& f) {
    TruthRow r;
    r.question_id = f[0];
    r.day = parse_int(f[1], "day");
    r.x_true = parse_double(f[2], "x_true");
    r.p_true = parse_double(f[3], "p_true");
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_truth_csv(const std::filesystem::path& path, const std::vector<TruthRow>& rows) {
  auto out = open_output(path);
  out << "question_id,day,x_true,p_true\n";
  for (const auto& r : rows) {
    out << r.question_id << ',' << r.day << ',' << format_double(r.x_true) << ','
        << format_double(r.p_true) << '\n';
  }
}

Dataset dataset_from_rows(const std::vector<ForecastRow>& forecasts,
                          const std::vector<OutcomeRow>& outcomes,
                          double censor_lo, double censor_hi) {
  std::vector<std::pair<std::string, int>> horizons;
  std::vector<std::pair<std::string, int>> known;
  for (const auto& o : outcomes) {
    horizons.emplace_back(o.question_id, o.horizon);
    if (o.outcome) known.emplace_back(o.question_id, *o.outcome);
  }
  std::vector<Forecast> fs;
  fs.reserve(forecasts.size());
  for (const auto& r : forecasts) {
    Forecast f;
    f.question_id = r.question_id;
    f.expert_id = r.expert_id;
    f.day = r.day;
    f.prob = censor(r.prob, censor_lo, censor_hi);
    f.group = r.expertise;
    fs.push_back(std::move(f));
  }
  return build_dataset(fs, horizons, known);
}

}  // namespace crowdbelief
