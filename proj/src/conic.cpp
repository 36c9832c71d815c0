#include "pcmpc/conic.hpp"

#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pcmpc {

void ConicData::validate() const {
    if (n < 1) throw std::invalid_argument("conic data needs n >= 1");
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("P dimension mismatch");
    if (q.size() != n) throw std::invalid_argument("q dimension mismatch");
    if (A.cols() != n || A.rows() != b.size()) {
        throw std::invalid_argument("equality block dimension mismatch");
    }
    if (G.cols() != n || G.rows() != h.size()) {
        throw std::invalid_argument("cone block dimension mismatch");
    }
    const int total = std::accumulate(cone_dims.begin(), cone_dims.end(), 0);
    if (total != h.size()) throw std::invalid_argument("cone dims do not cover cone rows");
    for (int d : cone_dims) {
        if (d < 1) throw std::invalid_argument("cone dimension must be >= 1");
    }
    if (!q.allFinite() || !b.allFinite() || !h.allFinite()) {
        throw std::invalid_argument("non-finite problem data");
    }
}

namespace {

void write_sparse(std::ostream& os, const char* name, const Eigen::SparseMatrix<double>& M) {
    os << name << " " << M.nonZeros() << "\n";
    for (int k = 0; k < M.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it) {
            os << it.row() << " " << it.col() << " " << it.value() << "\n";
        }
    }
}

void write_dense(std::ostream& os, const char* name, const Eigen::VectorXd& v) {
    os << name << " " << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << v(i) << "\n";
}

Eigen::SparseMatrix<double> read_sparse(std::istream& is, const char* name, int rows, int cols) {
    std::string tag;
    long nnz = 0;
    if (!(is >> tag >> nnz) || tag != name) {
        throw std::runtime_error(std::string("standard form: expected section ") + name);
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (long k = 0; k < nnz; ++k) {
        int i, j;
        double v;
        if (!(is >> i >> j >> v)) throw std::runtime_error("standard form: truncated triplets");
        trips.emplace_back(i, j, v);
    }
    Eigen::SparseMatrix<double> M(rows, cols);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

Eigen::VectorXd read_dense(std::istream& is, const char* name) {
    std::string tag;
    long size = 0;
    if (!(is >> tag >> size) || tag != name) {
        throw std::runtime_error(std::string("standard form: expected section ") + name);
    }
    Eigen::VectorXd v(size);
    for (long i = 0; i < size; ++i) {
        if (!(is >> v(i))) throw std::runtime_error("standard form: truncated vector");
    }
    return v;
}

}  // namespace

void write_standard_form(const ConicData& data, std::ostream& os) {
    data.validate();
    os << std::setprecision(17);
    os << "pcmpc-conic-v1\n";
    os << "n " << data.n << " eq " << data.eq_rows() << " cone_rows " << data.cone_rows()
       << " cones " << data.cone_dims.size() << " r0 " << data.r0 << "\n";
    os << "dims";
    for (int d : data.cone_dims) os << " " << d;
    os << "\n";
    write_sparse(os, "P", data.P);
    write_dense(os, "q", data.q);
    write_sparse(os, "A", data.A);
    write_dense(os, "b", data.b);
    write_sparse(os, "G", data.G);
    write_dense(os, "h", data.h);
    os << "end\n";
}

ConicData read_standard_form(std::istream& is) {
    std::string magic;
    if (!(is >> magic) || magic != "pcmpc-conic-v1") {
        throw std::runtime_error("standard form: bad magic line");
    }
    std::string t1, t2, t3, t4, t5;
    int n, me, mc;
    size_t ncones;
    double r0;
    if (!(is >> t1 >> n >> t2 >> me >> t3 >> mc >> t4 >> ncones >> t5 >> r0) || t1 != "n" ||
        t2 != "eq" || t3 != "cone_rows" || t4 != "cones" || t5 != "r0") {
        throw std::runtime_error("standard form: bad header line");
    }
    ConicData d;
    d.n = n;
    d.r0 = r0;
    std::string dimtag;
    if (!(is >> dimtag) || dimtag != "dims") throw std::runtime_error("standard form: bad dims");
    d.cone_dims.resize(ncones);
    for (size_t i = 0; i < ncones; ++i) {
        if (!(is >> d.cone_dims[i])) throw std::runtime_error("standard form: truncated dims");
    }
    d.P = read_sparse(is, "P", n, n);
    d.q = read_dense(is, "q");
    d.A = read_sparse(is, "A", me, n);
    d.b = read_dense(is, "b");
    d.G = read_sparse(is, "G", mc, n);
    d.h = read_dense(is, "h");
    std::string endtag;
    if (!(is >> endtag) || endtag != "end") throw std::runtime_error("standard form: no end tag");
    d.validate();
    return d;
}

}  // namespace pcmpc
