#include <math.h>

void kernel2(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

#pragma omp parallel for reduction(+:s)
  for (i = 0; i < n; i++)
    s += a[i];

#pragma omp parallel for private(t)
  for (i = 0; i < n; i++) {
    t = a[i] * 3.0;
    b[i] = t + 1.0;
  }
}
