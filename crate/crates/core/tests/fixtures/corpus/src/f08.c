#include <math.h>

void kernel8(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

#pragma omp parallel for schedule(static)
  for (i = 0; i < n; i++)
    b[i] = sqrt(a[i]);

  for (i = 0; i < n; i++) {
    x = a[i];
    a[i + 1] = x;
  }
}
