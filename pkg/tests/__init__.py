# Tests for hmlab
