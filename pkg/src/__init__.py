# hmlab package
