//@ ensures \result == 3*x;
int h(int x) { return k(x) + x; }
int k(int x) { return x+x; }
