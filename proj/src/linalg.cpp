#include "detbound/linalg.hpp"

namespace detbound::pauli {

Mat x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Mat y() {
  Mat m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

Mat z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace detbound::pauli
