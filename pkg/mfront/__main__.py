import sys

from mfront import main

sys.exit(main())
