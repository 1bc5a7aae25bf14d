#include <math.h>

void kernel10(int n, int m, double *a, double *b, double *c, double *h, int *idx, double **g) {
  int i, j, k, ok;
  double s, p, m2, d, t, u, x;
  s = 0.0;

#pragma omp parallel for num_threads(4)
  for (i = 0; i < n; i++)
    a[i] = a[i] + 1.0;

  for (i = 0; i < n; i++)
    a[i] = b[n - i - 1];
}
