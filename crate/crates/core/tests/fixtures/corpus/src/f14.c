#include <math.h>

void kernel14(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

  for (i = 0; i < n; i++)
    if (a[i] < 0.0)
      break;

#pragma omp parallel for lastprivate(t)
  for (i = 0; i < n; i++) {
    t = 2.0 * a[i];
    c[i] = t;
  }
}
