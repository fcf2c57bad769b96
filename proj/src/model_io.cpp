#include "bilinear/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "bilinear/errors.hpp"

namespace bilinear {

namespace {

void write_double(std::ostream& os, double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("save_model: non-finite weight");
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  os.write(buf, res.ptr - buf);
}

void write_values_line(std::ostream& os, const double* v, int n) {
  for (int i = 0; i < n; ++i) {
    if (i) os.put(' ');
    write_double(os, v[i]);
  }
  os.put('\n');
}

void write_matrix_rows(std::ostream& os, const Matrix& m) {
  for (int i = 0; i < m.rows(); ++i) write_values_line(os, m.row(i), m.cols());
}

void write_matrix_columns(std::ostream& os, const Matrix& m) {
  for (int l = 0; l < m.cols(); ++l) {
    for (int i = 0; i < m.rows(); ++i) {
      if (i) os.put(' ');
      write_double(os, m(i, l));
    }
    os.put('\n');
  }
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}

  std::string next() {
    std::string tok;
    if (!(is_ >> tok)) throw DataError("model file: unexpected end of file");
    return tok;
  }

  double next_double() {
    const std::string tok = next();
    double x = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
      throw DataError("model file: bad number '" + tok + "'");
    }
    if (!std::isfinite(x)) throw DataError("model file: non-finite weight '" + tok + "'");
    return x;
  }

  int next_int(const char* what, int min_value, int max_value = 1 << 24) {
    const std::string tok = next();
    int x = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
      throw DataError(std::string("model file: bad ") + what + " '" + tok + "'");
    }
    if (x < min_value || x > max_value) {
      throw DataError(std::string("model file: ") + what + "=" + tok +
                      " out of range [" + std::to_string(min_value) + ", " +
                      std::to_string(max_value) + "]");
    }
    return x;
  }

  bool at_end() {
    is_ >> std::ws;
    return is_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream& is_;
};

Matrix read_matrix_rows(TokenReader& r, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = r.next_double();
  }
  return m;
}

Matrix read_matrix_columns(TokenReader& r, int rows, int cols) {
  Matrix m(rows, cols);
  for (int l = 0; l < cols; ++l) {
    for (int i = 0; i < rows; ++i) m(i, l) = r.next_double();
  }
  return m;
}

BilinearModel read_bilinear_block(TokenReader& r, int rows, int cols, int l_rank) {
  BilinearModel m;
  m.a = read_matrix_columns(r, rows, l_rank);
  m.b = read_matrix_columns(r, cols, l_rank);
  return m;
}

}  // namespace

void save_model(std::ostream& os, const LinearModel& m) {
  os << "llr " << m.w.rows() << ' ' << m.w.cols() << '\n';
  write_matrix_rows(os, m.w);
}

void save_model(std::ostream& os, const BilinearModel& m) {
  if (m.a.cols() != m.b.cols()) {
    throw std::invalid_argument("save_model: A/B rank mismatch");
  }
  os << "blr " << m.a.rows() << ' ' << m.b.rows() << ' ' << m.rank() << '\n';
  write_matrix_columns(os, m.a);
  write_matrix_columns(os, m.b);
}

void save_model(std::ostream& os, const LinearSoftmaxModel& m) {
  if (m.w.size() < 2) throw std::invalid_argument("save_model: lsr needs K >= 2");
  os << "lsr " << m.w.front().rows() << ' ' << m.w.front().cols() << ' ' << m.w.size()
     << '\n';
  for (const Matrix& w : m.w) {
    if (w.rows() != m.w.front().rows() || w.cols() != m.w.front().cols()) {
      throw std::invalid_argument("save_model: lsr classes disagree on shape");
    }
    write_matrix_rows(os, w);
  }
}

void save_model(std::ostream& os, const BilinearSoftmaxModel& m) {
  if (m.classes.size() < 2) throw std::invalid_argument("save_model: bsr needs K >= 2");
  const BilinearModel& first = m.classes.front();
  os << "bsr " << first.a.rows() << ' ' << first.b.rows() << ' ' << first.rank() << ' '
     << m.classes.size() << '\n';
  for (const BilinearModel& c : m.classes) {
    if (c.a.rows() != first.a.rows() || c.b.rows() != first.b.rows() ||
        c.rank() != first.rank()) {
      throw std::invalid_argument("save_model: bsr classes disagree on shape");
    }
    write_matrix_columns(os, c.a);
    write_matrix_columns(os, c.b);
  }
}

AnyModel load_model(std::istream& is) {
  TokenReader r(is);
  const std::string kind = r.next();
  AnyModel out;
  if (kind == "llr") {
    const int rows = r.next_int("M", 1);
    const int cols = r.next_int("N", 1);
    out = LinearModel{read_matrix_rows(r, rows, cols)};
  } else if (kind == "blr") {
    const int rows = r.next_int("M", 1);
    const int cols = r.next_int("N", 1);
    const int l_rank = r.next_int("L", 1);
    out = read_bilinear_block(r, rows, cols, l_rank);
  } else if (kind == "lsr") {
    const int rows = r.next_int("M", 1);
    const int cols = r.next_int("N", 1);
    const int k = r.next_int("K", 2);
    LinearSoftmaxModel m;
    m.w.reserve(k);
    for (int i = 0; i < k; ++i) m.w.push_back(read_matrix_rows(r, rows, cols));
    out = std::move(m);
  } else if (kind == "bsr") {
    const int rows = r.next_int("M", 1);
    const int cols = r.next_int("N", 1);
    const int l_rank = r.next_int("L", 1);
    const int k = r.next_int("K", 2);
    BilinearSoftmaxModel m;
    m.classes.reserve(k);
    for (int i = 0; i < k; ++i) {
      m.classes.push_back(read_bilinear_block(r, rows, cols, l_rank));
    }
    out = std::move(m);
  } else {
    throw DataError("model file: unknown kind '" + kind + "'");
  }
  if (!r.at_end()) {
    throw DataError("model file: unexpected trailing content");
  }
  return out;
}

std::string model_kind(const AnyModel& m) {
  switch (m.index()) {
    case 0: return "llr";
    case 1: return "blr";
    case 2: return "lsr";
    default: return "bsr";
  }
}

void save_model_file(const std::string& path, const AnyModel& m) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open model file for writing: " + path);
  std::visit([&](const auto& model) { save_model(os, model); }, m);
  os.flush();
  if (!os) throw DataError("failed writing model file: " + path);
}

AnyModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open model file: " + path);
  return load_model(is);
}

}  // namespace bilinear
