#include <math.h>

void kernel11(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

#pragma omp parallel for reduction(+:s) private(t, u)
  for (i = 0; i < n; i++) {
    t = a[i];
    u = b[i];
    s += t * u;
  }

  for (i = 0; i < n; i++) {
    s = s * 0.5 + a[i];
    a[i] = s;
  }
}
