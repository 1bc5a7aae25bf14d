double dot(int n, double *x, double *y) {
  int j;
  double sum = 0.0;
#pragma omp parallel for reduction(+:sum)
  for (j = 0; j < n; j++)
    sum = sum + x[j] * y[j];
  return sum;
}

void axpy(int n, double alpha, double *x, double *y) {
  int j;
#pragma omp parallel for
  for (j = 0; j < n; j++)
    y[j] = y[j] + alpha * x[j];
}
