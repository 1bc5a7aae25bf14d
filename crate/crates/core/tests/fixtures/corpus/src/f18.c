#include <math.h>

void kernel18(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

#pragma omp parallel for reduction(&&:ok)
  for (i = 0; i < n; i++)
    ok = ok && a[i] > 0.0;
}
